use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corpus::Corpus;
use crate::audio::AudioBuffer;
use crate::disguise::{disguise, DisguiseFamily, DisguiseSpec};
use crate::error::{Error, Result};
use crate::restore::default_grid;

/// One verification trial. `disguise_meta` is ground truth for bias
/// statistics only and never reaches scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub enroll_id: String,
    pub test_id: String,
    pub label: Option<bool>,
    pub disguise_meta: Option<DisguiseSpec>,
}

/// A generated trial together with the clean corpus utterance its test side
/// is rendered from.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedTrial {
    pub trial: Trial,
    pub source_id: String,
}

/// How test sides are disguised.
#[derive(Debug, Clone, PartialEq)]
pub enum DisguisePolicy {
    None,
    /// Parameters drawn uniformly from the family's default grid restricted
    /// to `[min, max]`.
    Family {
        family: DisguiseFamily,
        min: f64,
        max: f64,
    },
    /// A VTLN family drawn uniformly, then a parameter from its default grid.
    MixedVtln,
}

impl DisguisePolicy {
    fn draw(&self, rng: &mut ChaCha8Rng) -> Option<DisguiseSpec> {
        let (family, values) = match self {
            DisguisePolicy::None => return None,
            DisguisePolicy::Family { family, min, max } => {
                let values: Vec<f64> = default_grid(*family)
                    .values()
                    .iter()
                    .copied()
                    .filter(|v| (min - 1e-9..=max + 1e-9).contains(v))
                    .collect();
                (*family, values)
            }
            DisguisePolicy::MixedVtln => {
                let family = DisguiseFamily::VTLN[rng.random_range(0..DisguiseFamily::VTLN.len())];
                (family, default_grid(family).values().to_vec())
            }
        };
        let param = values[rng.random_range(0..values.len())];
        Some(DisguiseSpec::new(family, param).expect("grid values are in range"))
    }

    fn validate(&self) -> Result<()> {
        if let DisguisePolicy::Family { family, min, max } = self {
            let any = default_grid(*family)
                .values()
                .iter()
                .any(|v| (min - 1e-9..=max + 1e-9).contains(v));
            if !any {
                return Err(Error::InvalidArgument(format!(
                    "no {family} grid values in [{min}, {max}]"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for DisguisePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DisguisePolicy::None => f.write_str("none"),
            DisguisePolicy::Family { family, min, max } => write!(f, "{family}:{min}:{max}"),
            DisguisePolicy::MixedVtln => f.write_str("mixed-vtln"),
        }
    }
}

/// `none`, `mixed-vtln`, `<family>` (full default grid) or
/// `<family>:<min>:<max>`.
impl FromStr for DisguisePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown disguise policy `{s}`"));
        let policy = match s {
            "none" => DisguisePolicy::None,
            "mixed-vtln" => DisguisePolicy::MixedVtln,
            _ => {
                let parts: Vec<&str> = s.split(':').collect();
                let family: DisguiseFamily = parts[0].parse()?;
                let (min, max) = match parts.len() {
                    1 => family.range(),
                    3 => (
                        parts[1].parse().map_err(|_| bad())?,
                        parts[2].parse().map_err(|_| bad())?,
                    ),
                    _ => return Err(bad()),
                };
                DisguisePolicy::Family { family, min, max }
            }
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// Balanced same/different-speaker trials: `n_trials / 2` same-speaker
/// pairs of distinct utterances, the rest cross-speaker, in random order.
/// Disguised test sides get the id `<source>.t<index>`.
pub fn gen_trials(
    corpus: &Corpus,
    n_trials: usize,
    policy: &DisguisePolicy,
    seed: u64,
) -> Result<Vec<PlannedTrial>> {
    policy.validate()?;
    if n_trials == 0 {
        return Err(Error::EmptyInput("trial count"));
    }
    let speakers = corpus.speakers();
    let by_speaker: Vec<Vec<&str>> = speakers
        .iter()
        .map(|s| corpus.utterances_of(s).map(|u| u.id.as_str()).collect())
        .collect();
    let n_same = n_trials / 2;
    let n_diff = n_trials - n_same;
    let multi: Vec<usize> = (0..speakers.len())
        .filter(|&i| by_speaker[i].len() >= 2)
        .collect();
    if n_same > 0 && multi.is_empty() {
        return Err(Error::CorpusTooSmall(
            "no speaker has two utterances for same-speaker trials".into(),
        ));
    }
    if n_diff > 0 && speakers.len() < 2 {
        return Err(Error::CorpusTooSmall(
            "different-speaker trials need at least two speakers".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<bool> = (0..n_trials).map(|i| i < n_same).collect();
    labels.shuffle(&mut rng);
    let mut out = Vec::with_capacity(n_trials);
    for (idx, same) in labels.into_iter().enumerate() {
        let (enroll, source) = if same {
            let utts = &by_speaker[multi[rng.random_range(0..multi.len())]];
            let a = rng.random_range(0..utts.len());
            let mut b = rng.random_range(0..utts.len() - 1);
            if b >= a {
                b += 1;
            }
            (utts[a], utts[b])
        } else {
            let s1 = rng.random_range(0..speakers.len());
            let mut s2 = rng.random_range(0..speakers.len() - 1);
            if s2 >= s1 {
                s2 += 1;
            }
            let u1 = &by_speaker[s1];
            let u2 = &by_speaker[s2];
            (
                u1[rng.random_range(0..u1.len())],
                u2[rng.random_range(0..u2.len())],
            )
        };
        let meta = policy.draw(&mut rng);
        let test_id = match meta {
            Some(_) => format!("{source}.t{idx:05}"),
            None => source.to_string(),
        };
        out.push(PlannedTrial {
            trial: Trial {
                enroll_id: enroll.to_string(),
                test_id,
                label: Some(same),
                disguise_meta: meta,
            },
            source_id: source.to_string(),
        });
    }
    Ok(out)
}

/// Audio for every id referenced by `planned`: clean corpus utterances and
/// the disguised test sides.
pub fn render_trials(
    corpus: &Corpus,
    planned: &[PlannedTrial],
) -> Result<BTreeMap<String, AudioBuffer>> {
    use rayon::prelude::*;
    let lookup = |id: &str| {
        corpus
            .get(id)
            .map(|u| &u.audio)
            .ok_or_else(|| Error::UnknownUtterance(id.to_string()))
    };
    let rendered: Vec<(String, AudioBuffer)> = planned
        .par_iter()
        .map(|p| {
            let source = lookup(&p.source_id)?;
            let audio = match &p.trial.disguise_meta {
                Some(spec) => disguise(source, spec)?,
                None => source.clone(),
            };
            Ok((p.trial.test_id.clone(), audio))
        })
        .collect::<Result<_>>()?;
    let mut audio = BTreeMap::new();
    for p in planned {
        audio.insert(
            p.trial.enroll_id.clone(),
            lookup(&p.trial.enroll_id)?.clone(),
        );
    }
    audio.extend(rendered);
    Ok(audio)
}

/// `<0|1> <enroll> <test> [family:param]` per line.
pub fn format_trials(trials: &[Trial]) -> Result<String> {
    let mut text = String::new();
    for t in trials {
        let label = t.label.ok_or_else(|| {
            Error::InvalidArgument(format!("trial {} {} has no label", t.enroll_id, t.test_id))
        })?;
        text.push_str(if label { "1 " } else { "0 " });
        text.push_str(&t.enroll_id);
        text.push(' ');
        text.push_str(&t.test_id);
        if let Some(spec) = &t.disguise_meta {
            text.push(' ');
            text.push_str(&spec.to_string());
        }
        text.push('\n');
    }
    Ok(text)
}

pub fn parse_trials(text: &str, path: &Path) -> Result<Vec<Trial>> {
    let bad = |line: usize, message: String| Error::TrialFile {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut trials = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() || tokens[0].starts_with('#') {
            continue;
        }
        if !(3..=4).contains(&tokens.len()) {
            return Err(bad(
                line,
                format!("expected 3 or 4 fields, found {}", tokens.len()),
            ));
        }
        let label = match tokens[0] {
            "1" => true,
            "0" => false,
            other => return Err(bad(line, format!("label `{other}` is not 0 or 1"))),
        };
        let disguise_meta = match tokens.get(3) {
            Some(s) => Some(s.parse().map_err(|e: Error| bad(line, e.to_string()))?),
            None => None,
        };
        trials.push(Trial {
            enroll_id: tokens[1].to_string(),
            test_id: tokens[2].to_string(),
            label: Some(label),
            disguise_meta,
        });
    }
    if trials.is_empty() {
        return Err(bad(0, "no trials".into()));
    }
    Ok(trials)
}

pub fn read_trials(path: impl AsRef<Path>) -> Result<Vec<Trial>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trials(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::corpus::{synth_corpus, CorpusConfig};

    fn corpus() -> Corpus {
        synth_corpus(&CorpusConfig {
            n_speakers: 4,
            utts_per_speaker: 3,
            seed: 1,
            duration_s: 0.6,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn balanced_and_valid() {
        let c = corpus();
        let t = gen_trials(&c, 100, &DisguisePolicy::None, 3).unwrap();
        assert_eq!(t.len(), 100);
        let same = t.iter().filter(|p| p.trial.label == Some(true)).count();
        assert!((45..=55).contains(&same));
        for p in &t {
            assert!(p.trial.disguise_meta.is_none());
            assert_eq!(p.trial.test_id, p.source_id);
            let e = c.get(&p.trial.enroll_id).unwrap();
            let s = c.get(&p.source_id).unwrap();
            assert_eq!(p.trial.label == Some(true), e.speaker == s.speaker);
            assert_ne!(p.trial.enroll_id, p.source_id);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let c = corpus();
        let p = DisguisePolicy::MixedVtln;
        assert_eq!(
            gen_trials(&c, 50, &p, 8).unwrap(),
            gen_trials(&c, 50, &p, 8).unwrap()
        );
        assert_ne!(
            gen_trials(&c, 50, &p, 8).unwrap(),
            gen_trials(&c, 50, &p, 9).unwrap()
        );
    }

    #[test]
    fn family_policy_respects_range() {
        let c = corpus();
        let p: DisguisePolicy = "pitch-freq:-8:8".parse().unwrap();
        for t in gen_trials(&c, 200, &p, 2).unwrap() {
            let spec = t.trial.disguise_meta.unwrap();
            assert_eq!(spec.family(), DisguiseFamily::PitchScaleFreq);
            assert!(spec.param().abs() <= 8.0 && spec.param().fract() == 0.0);
            assert!(t.trial.test_id.starts_with(&t.source_id));
        }
    }

    #[test]
    fn mixed_vtln_covers_families() {
        let c = corpus();
        let t = gen_trials(&c, 400, &DisguisePolicy::MixedVtln, 4).unwrap();
        for fam in DisguiseFamily::VTLN {
            let n = t
                .iter()
                .filter(|p| p.trial.disguise_meta.unwrap().family() == fam)
                .count();
            assert!(n >= 60, "{fam}: {n}");
        }
    }

    #[test]
    fn policy_parsing() {
        assert_eq!(
            "none".parse::<DisguisePolicy>().unwrap(),
            DisguisePolicy::None
        );
        assert_eq!(
            "pitch".parse::<DisguisePolicy>().unwrap(),
            DisguisePolicy::Family {
                family: DisguiseFamily::PitchScaleFreq,
                min: -11.0,
                max: 11.0
            }
        );
        assert!("pitch-freq:20:30".parse::<DisguisePolicy>().is_err());
        assert!("reverb".parse::<DisguisePolicy>().is_err());
    }

    #[test]
    fn too_small_corpus() {
        let c = synth_corpus(&CorpusConfig {
            n_speakers: 2,
            utts_per_speaker: 2,
            duration_s: 0.6,
            ..Default::default()
        })
        .unwrap();
        let one = Corpus {
            sample_rate: c.sample_rate,
            utterances: c.utterances[..2].to_vec(),
        };
        assert!(matches!(
            gen_trials(&one, 10, &DisguisePolicy::None, 0),
            Err(Error::CorpusTooSmall(_))
        ));
    }

    #[test]
    fn trial_file_round_trip() {
        let c = corpus();
        let p: DisguisePolicy = "vtln-power".parse().unwrap();
        let trials: Vec<Trial> = gen_trials(&c, 20, &p, 5)
            .unwrap()
            .into_iter()
            .map(|p| p.trial)
            .collect();
        let text = format_trials(&trials).unwrap();
        assert_eq!(parse_trials(&text, Path::new("t")).unwrap(), trials);
    }

    #[test]
    fn trial_file_errors() {
        let p = Path::new("t.txt");
        assert!(matches!(
            parse_trials("1 a b\n2 a b\n", p),
            Err(Error::TrialFile { line: 2, .. })
        ));
        assert!(parse_trials("1 a\n", p).is_err());
        assert!(parse_trials("1 a b vtln-power:0.9\n", p).is_err());
        assert!(parse_trials("\n", p).is_err());
    }

    #[test]
    fn rendering_applies_disguise() {
        let c = corpus();
        let p: DisguisePolicy = "pitch-time:4:4".parse().unwrap();
        let planned = gen_trials(&c, 6, &p, 1).unwrap();
        let audio = render_trials(&c, &planned).unwrap();
        for t in &planned {
            let src = &c.get(&t.source_id).unwrap().audio;
            let y = &audio[&t.trial.test_id];
            let ratio = src.len() as f64 / y.len() as f64;
            assert!((ratio - 2f64.powf(4.0 / 12.0)).abs() < 1e-3);
            assert!(audio.contains_key(&t.trial.enroll_id));
        }
    }
}
