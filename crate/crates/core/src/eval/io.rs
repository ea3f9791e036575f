//! On-disk layouts for corpora, trial bundles and reports.
//!
//! A corpus directory holds `corpus.lst` (`<utt> <speaker> <relpath>` per
//! line) and the WAV files it names. A trial bundle holds `trials.txt` with
//! tokens that are paths relative to the trial file, plus an `audio/`
//! directory with the enrollment and (possibly disguised) test audio.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::corpus::{Corpus, CorpusUtterance};
use super::matrix::{matrix_csv, per_alpha_csv, MatrixReport, TrialSet};
use super::trials::{format_trials, read_trials, PlannedTrial, Trial};
use crate::asv::ScorerConfig;
use crate::audio::{load_wav, save_wav_with_format, AudioBuffer, SampleFormat};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

pub const CORPUS_LIST: &str = "corpus.lst";
pub const TRIAL_LIST: &str = "trials.txt";

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes `corpus.lst` and `wav/<utt>.wav` (32-bit float) under `dir`.
pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    create_dir(&dir.join("wav"))?;
    corpus
        .utterances
        .par_iter()
        .map(|u| {
            save_wav_with_format(
                &u.audio,
                dir.join("wav").join(format!("{}.wav", u.id)),
                SampleFormat::Float32,
            )
        })
        .collect::<Result<Vec<()>>>()?;
    let mut list = String::new();
    for u in &corpus.utterances {
        list.push_str(&format!("{} {} wav/{}.wav\n", u.id, u.speaker, u.id));
    }
    write_atomic(&dir.join(CORPUS_LIST), list.as_bytes())
}

/// Reads a corpus directory (or a `corpus.lst` path directly).
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let list = if path.is_dir() {
        path.join(CORPUS_LIST)
    } else {
        path.to_path_buf()
    };
    let base = list.parent().map(Path::to_path_buf).unwrap_or_default();
    let text = std::fs::read_to_string(&list).map_err(|e| Error::io(&list, e))?;
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 3 {
            return Err(Error::TrialFile {
                path: list.clone(),
                line: i + 1,
                message: "expected `<utt> <speaker> <path>`".into(),
            });
        }
        entries.push((
            tokens[0].to_string(),
            tokens[1].to_string(),
            base.join(tokens[2]),
        ));
    }
    let utterances = entries
        .into_par_iter()
        .map(|(id, speaker, wav)| {
            Ok(CorpusUtterance {
                id,
                speaker,
                audio: load_wav(&wav)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let Some(first) = utterances.first() else {
        return Err(Error::EmptyInput("corpus"));
    };
    let sample_rate = first.audio.sample_rate();
    if let Some(u) = utterances
        .iter()
        .find(|u| u.audio.sample_rate() != sample_rate)
    {
        return Err(Error::InvalidArgument(format!(
            "{} has sample rate {} Hz, expected {sample_rate} Hz",
            u.id,
            u.audio.sample_rate()
        )));
    }
    for (i, u) in utterances.iter().enumerate() {
        if utterances[..i].iter().any(|v| v.id == u.id) {
            return Err(Error::DuplicateId(u.id.clone()));
        }
    }
    Ok(Corpus {
        sample_rate,
        utterances,
    })
}

/// Writes `trials.txt` and `audio/<id>.wav` under `dir`. Trial tokens are
/// rewritten to the relative audio paths.
pub fn write_trial_bundle(
    dir: &Path,
    planned: &[PlannedTrial],
    audio: &BTreeMap<String, AudioBuffer>,
) -> Result<Vec<Trial>> {
    let token = |id: &str| format!("audio/{id}.wav");
    let trials: Vec<Trial> = planned
        .iter()
        .map(|p| Trial {
            enroll_id: token(&p.trial.enroll_id),
            test_id: token(&p.trial.test_id),
            ..p.trial.clone()
        })
        .collect();
    let text = format_trials(&trials)?;
    create_dir(&dir.join("audio"))?;
    audio
        .par_iter()
        .map(|(id, buf)| save_wav_with_format(buf, dir.join(token(id)), SampleFormat::Float32))
        .collect::<Result<Vec<()>>>()?;
    write_atomic(&dir.join(TRIAL_LIST), text.as_bytes())?;
    Ok(trials)
}

/// Reads a trial list and loads the audio its tokens name. A token is a
/// path relative to the trial file; with an external scorer, a token that is
/// not a file is taken as an embedding id.
pub fn load_trial_set(path: &Path, scorer: &ScorerConfig) -> Result<TrialSet> {
    let trials = read_trials(path)?;
    let base: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut tokens: Vec<&str> = trials
        .iter()
        .flat_map(|t| [t.enroll_id.as_str(), t.test_id.as_str()])
        .collect();
    tokens.sort_unstable();
    tokens.dedup();
    let loaded = tokens
        .par_iter()
        .map(|&tok| {
            let file = base.join(tok);
            if file.is_file() {
                return Ok(Some((tok.to_string(), load_wav(&file)?)));
            }
            match scorer {
                ScorerConfig::External(table) if table.contains_key(tok) => Ok(None),
                _ => Err(Error::UnknownUtterance(tok.to_string())),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialSet {
        trials,
        audio: loaded.into_iter().flatten().collect(),
    })
}

/// All files of a report, rendered in memory: `(path, contents)`.
pub fn render_report(out: &Path, report: &MatrixReport) -> Result<Vec<(PathBuf, Vec<u8>)>> {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::InvalidArgument(format!("bad report path {}", out.display())))?;
    let dir = out.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut files = Vec::new();
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    files.push((
        dir.join(format!("{stem}.csv")),
        matrix_csv(report).into_bytes(),
    ));
    for curve in &report.per_alpha {
        let name = format!(
            "{stem}_per_alpha_{}_{}.csv",
            curve.restoration, curve.family
        );
        files.push((dir.join(name), per_alpha_csv(curve).into_bytes()));
    }
    // The JSON goes last: its presence marks a complete report.
    files.push((out.to_path_buf(), json));
    Ok(files)
}

pub fn write_report(out: &Path, report: &MatrixReport) -> Result<Vec<PathBuf>> {
    let files = render_report(out, report)?;
    for (path, bytes) in &files {
        write_atomic(path, bytes)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::corpus::{synth_corpus, CorpusConfig};
    use crate::eval::trials::{gen_trials, render_trials, DisguisePolicy};

    fn small() -> Corpus {
        synth_corpus(&CorpusConfig {
            n_speakers: 2,
            utts_per_speaker: 2,
            seed: 4,
            duration_s: 0.6,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn corpus_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = small();
        write_corpus(dir.path(), &c).unwrap();
        let back = load_corpus(dir.path()).unwrap();
        assert_eq!(back.utterances.len(), 4);
        for (a, b) in c.utterances.iter().zip(&back.utterances) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.speaker, b.speaker);
            for (x, y) in a.audio.samples().iter().zip(b.audio.samples()) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn trial_bundle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = small();
        let planned =
            gen_trials(&c, 6, &"vtln-power".parse::<DisguisePolicy>().unwrap(), 2).unwrap();
        let audio = render_trials(&c, &planned).unwrap();
        let written = write_trial_bundle(dir.path(), &planned, &audio).unwrap();
        let set = load_trial_set(&dir.path().join(TRIAL_LIST), &ScorerConfig::Builtin).unwrap();
        assert_eq!(set.trials, written);
        for t in &set.trials {
            assert!(set.audio.contains_key(&t.enroll_id));
            assert!(set.audio.contains_key(&t.test_id));
        }
    }

    #[test]
    fn unresolvable_token() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        std::fs::write(&path, "1 a.wav b.wav\n").unwrap();
        assert!(matches!(
            load_trial_set(&path, &ScorerConfig::Builtin),
            Err(Error::UnknownUtterance(_))
        ));
    }
}
