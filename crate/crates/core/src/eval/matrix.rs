use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::eer::{compute_eer, EerReport};
use super::trials::Trial;
use crate::asv::{distance, Embedding, ScorerConfig};
use crate::audio::AudioBuffer;
use crate::disguise::{DisguiseFamily, DisguiseSpec};
use crate::error::{Error, Result};
use crate::pitch::{estimate_f0, mean_f0};
use crate::restore::{default_grid, snapped_f0_ratio, CandidateScorer, GridSpec, Utterance};

/// How each trial's test side is restored before scoring.
#[derive(Debug, Clone, PartialEq)]
pub enum Restoration {
    None,
    Grid(GridSpec),
    F0Ratio,
}

impl Restoration {
    pub fn name(&self) -> String {
        match self {
            Restoration::None => "none".into(),
            Restoration::Grid(g) => g.family().name().into(),
            Restoration::F0Ratio => "f0ratio".into(),
        }
    }

    /// Family whose parameter the restoration estimates.
    pub fn family(&self) -> Option<DisguiseFamily> {
        match self {
            Restoration::None => None,
            Restoration::Grid(g) => Some(g.family()),
            Restoration::F0Ratio => Some(DisguiseFamily::PitchScaleFreq),
        }
    }
}

impl fmt::Display for Restoration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// `none`, `f0ratio`, or a family name (default grid).
impl FromStr for Restoration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Restoration::None),
            "f0ratio" | "f0-ratio" => Ok(Restoration::F0Ratio),
            _ => Ok(Restoration::Grid(default_grid(s.parse()?))),
        }
    }
}

/// Trials plus the audio they reference, keyed by trial token.
#[derive(Debug, Clone, Default)]
pub struct TrialSet {
    pub trials: Vec<Trial>,
    pub audio: BTreeMap<String, AudioBuffer>,
}

impl TrialSet {
    /// Trial list with the ground truth removed.
    pub fn blind(&self) -> TrialSet {
        TrialSet {
            trials: self
                .trials
                .iter()
                .map(|t| Trial {
                    disguise_meta: None,
                    ..t.clone()
                })
                .collect(),
            audio: self.audio.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub distance: f64,
    pub alpha_hat: Option<f64>,
    /// F0-ratio restoration found a side unvoiced and left the test as is.
    pub unvoiced: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestorationRun {
    pub restoration: Restoration,
    /// One outcome per trial, in trial order.
    pub outcomes: Vec<TrialOutcome>,
    pub eer: EerReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixRow {
    pub disguise: String,
    pub restoration: String,
    pub eer: f64,
    pub threshold: f64,
    pub n_same: usize,
    pub n_diff: usize,
    /// Trials scored without restoration because F0 was unavailable.
    pub unvoiced_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasBucket {
    pub alpha: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasStats {
    pub buckets: Vec<BiasBucket>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasEntry {
    pub restoration: String,
    pub family: DisguiseFamily,
    pub stats: BiasStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaEer {
    pub alpha: f64,
    pub eer: f64,
    pub n_same: usize,
    pub n_diff: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerAlphaCurve {
    pub restoration: String,
    pub family: DisguiseFamily,
    pub points: Vec<AlphaEer>,
}

/// Mean absolute estimation error above and below the identity parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymmetryEntry {
    pub restoration: String,
    pub family: DisguiseFamily,
    pub mean_abs_error_above: Option<f64>,
    pub mean_abs_error_below: Option<f64>,
    pub larger_above: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixReport {
    pub matrix: Vec<MatrixRow>,
    pub bias: Vec<BiasEntry>,
    pub per_alpha: Vec<PerAlphaCurve>,
    pub asymmetry: Vec<AsymmetryEntry>,
    #[serde(skip)]
    pub runs: Vec<RestorationRun>,
}

impl MatrixReport {
    pub fn run(&self, restoration: &str) -> Option<&RestorationRun> {
        self.runs
            .iter()
            .find(|r| r.restoration.name() == restoration)
    }

    pub fn eer(&self, restoration: &str) -> Option<f64> {
        self.run(restoration).map(|r| r.eer.eer_percent)
    }
}

/// Per true-parameter mean and population standard deviation of
/// `alpha_hat - alpha`.
pub fn alpha_bias(results: &[(f64, f64)]) -> Result<BiasStats> {
    if results.is_empty() {
        return Err(Error::EmptyInput("bias results"));
    }
    let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut sorted = results.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    for (hat, truth) in sorted {
        match groups.last_mut() {
            Some((a, errs)) if *a == truth => errs.push(hat - truth),
            _ => groups.push((truth, vec![hat - truth])),
        }
    }
    let buckets = groups
        .into_iter()
        .map(|(alpha, errs)| {
            let n = errs.len() as f64;
            let mean = errs.iter().sum::<f64>() / n;
            let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
            BiasBucket {
                alpha,
                mean,
                std: var.sqrt(),
                count: errs.len(),
            }
        })
        .collect();
    Ok(BiasStats { buckets })
}

/// Name of the disguise condition of a trial list: `none`, a family name,
/// `mixed-vtln`, or `mixed`.
pub fn disguise_label(trials: &[Trial]) -> String {
    let families: BTreeSet<&str> = trials
        .iter()
        .filter_map(|t| t.disguise_meta.map(|d| d.family().name()))
        .collect();
    let all_vtln = trials
        .iter()
        .filter_map(|t| t.disguise_meta)
        .all(|d| d.family().is_vtln());
    match families.len() {
        0 => "none".into(),
        1 => families.into_iter().next().expect("one family").into(),
        _ if all_vtln => "mixed-vtln".into(),
        _ => "mixed".into(),
    }
}

/// Whether an estimate from `restoration` is measured in the same units as
/// the ground-truth parameter of `truth`.
fn comparable(restoration: DisguiseFamily, truth: DisguiseFamily) -> bool {
    restoration == truth || (restoration.is_pitch() && truth.is_pitch())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixOptions {
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
    /// Overrides the disguise label derived from trial metadata.
    pub label: Option<String>,
}

impl Default for MatrixOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            label: None,
        }
    }
}

/// Scores every trial under every restoration and reduces to EERs, bias
/// statistics and per-parameter EER curves. Ground truth is read only after
/// all scores are fixed.
pub fn run_matrix(
    set: &TrialSet,
    restorations: &[Restoration],
    scorer: &ScorerConfig,
    options: &MatrixOptions,
) -> Result<MatrixReport> {
    if set.trials.is_empty() {
        return Err(Error::EmptyInput("trials"));
    }
    if restorations.is_empty() {
        return Err(Error::EmptyInput("restorations"));
    }
    if let Some(t) = set.trials.iter().find(|t| t.label.is_none()) {
        return Err(Error::InvalidArgument(format!(
            "trial {} {} has no label",
            t.enroll_id, t.test_id
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let scoring: Vec<ScoringTrial> = set
        .trials
        .iter()
        .map(|t| ScoringTrial {
            enroll_id: &t.enroll_id,
            test_id: &t.test_id,
        })
        .collect();
    let outcomes = pool.install(|| score_all(set, &scoring, restorations, scorer))?;

    let labels: Vec<bool> = set.trials.iter().map(|t| t.label == Some(true)).collect();
    let disguise = options
        .label
        .clone()
        .unwrap_or_else(|| disguise_label(&set.trials));
    let mut runs = Vec::with_capacity(restorations.len());
    for (r, restoration) in restorations.iter().enumerate() {
        let per_trial: Vec<TrialOutcome> = outcomes.iter().map(|o| o[r]).collect();
        let eer = eer_of(&per_trial, &labels, |_| true)?;
        runs.push(RestorationRun {
            restoration: restoration.clone(),
            outcomes: per_trial,
            eer,
        });
    }

    let matrix = runs
        .iter()
        .map(|run| MatrixRow {
            disguise: disguise.clone(),
            restoration: run.restoration.name(),
            eer: run.eer.eer_percent,
            threshold: run.eer.threshold,
            n_same: run.eer.n_same,
            n_diff: run.eer.n_diff,
            unvoiced_fallbacks: run.outcomes.iter().filter(|o| o.unvoiced).count(),
        })
        .collect();
    let (bias, asymmetry) = bias_tables(&set.trials, &runs)?;
    let per_alpha = per_alpha_curves(&set.trials, &labels, &runs)?;
    Ok(MatrixReport {
        matrix,
        bias,
        per_alpha,
        asymmetry,
        runs,
    })
}

/// The only trial fields scoring may see.
struct ScoringTrial<'a> {
    enroll_id: &'a str,
    test_id: &'a str,
}

fn score_all(
    set: &TrialSet,
    trials: &[ScoringTrial<'_>],
    restorations: &[Restoration],
    scorer: &ScorerConfig,
) -> Result<Vec<Vec<TrialOutcome>>> {
    let audio = |id: &str| set.audio.get(id);
    let needs_plain_test = restorations.contains(&Restoration::None);
    let needs_restorer = restorations.iter().any(|r| *r != Restoration::None);

    let mut ids: BTreeSet<&str> = trials.iter().map(|t| t.enroll_id).collect();
    if needs_plain_test {
        ids.extend(trials.iter().map(|t| t.test_id));
    }
    let ids: Vec<&str> = ids.into_iter().collect();
    let embeddings: BTreeMap<&str, Embedding> = ids
        .par_iter()
        .map(|&id| Ok((id, scorer.embedding(id, audio(id))?)))
        .collect::<Result<_>>()?;

    // `None` marks an utterance without voiced frames.
    let f0: BTreeMap<&str, Option<f64>> = if restorations.contains(&Restoration::F0Ratio) {
        let ids: BTreeSet<&str> = trials
            .iter()
            .flat_map(|t| [t.enroll_id, t.test_id])
            .collect();
        let ids: Vec<&str> = ids.into_iter().collect();
        ids.par_iter()
            .map(|&id| {
                let a = audio(id).ok_or_else(|| Error::UnknownUtterance(id.to_string()))?;
                match mean_f0(&estimate_f0(a)?) {
                    Ok(f) => Ok((id, Some(f))),
                    Err(Error::Unvoiced) => Ok((id, None)),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_>>()?
    } else {
        BTreeMap::new()
    };

    trials
        .par_iter()
        .map(|t| {
            let enroll = &embeddings[t.enroll_id];
            let candidates = if needs_restorer {
                let test = Utterance {
                    id: t.test_id,
                    audio: audio(t.test_id),
                };
                Some(CandidateScorer::new(enroll.clone(), test, scorer)?)
            } else {
                None
            };
            restorations
                .iter()
                .map(|r| match r {
                    Restoration::None => Ok(TrialOutcome {
                        distance: distance(enroll, &embeddings[t.test_id])?,
                        alpha_hat: None,
                        unvoiced: false,
                    }),
                    Restoration::Grid(grid) => {
                        let c = candidates.as_ref().expect("built for restorations");
                        let res = c.grid_search(grid)?;
                        Ok(TrialOutcome {
                            distance: res.d_hat,
                            alpha_hat: Some(res.alpha_hat),
                            unvoiced: false,
                        })
                    }
                    Restoration::F0Ratio => {
                        let c = candidates.as_ref().expect("built for restorations");
                        let (alpha, unvoiced) = match (f0[t.enroll_id], f0[t.test_id]) {
                            (Some(fx), Some(fy)) => (snapped_f0_ratio(fx, fy)?, false),
                            _ => {
                                log::warn!(
                                    "no voiced frames in {} or {}; f0ratio leaves the test unrestored",
                                    t.enroll_id,
                                    t.test_id
                                );
                                (DisguiseFamily::PitchScaleFreq.identity(), true)
                            }
                        };
                        let (d, _) = c.score(DisguiseFamily::PitchScaleFreq, alpha)?;
                        Ok(TrialOutcome {
                            distance: d,
                            alpha_hat: Some(alpha),
                            unvoiced,
                        })
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

fn eer_of(
    outcomes: &[TrialOutcome],
    labels: &[bool],
    keep: impl Fn(usize) -> bool,
) -> Result<EerReport> {
    let (mut same, mut diff) = (Vec::new(), Vec::new());
    for (i, (o, &l)) in outcomes.iter().zip(labels).enumerate() {
        if keep(i) {
            if l {
                same.push(o.distance);
            } else {
                diff.push(o.distance);
            }
        }
    }
    compute_eer(&same, &diff)
}

/// Bias over same-speaker trials whose ground truth is comparable with the
/// restoration's parameter, one entry per (restoration, disguise family).
fn bias_tables(
    trials: &[Trial],
    runs: &[RestorationRun],
) -> Result<(Vec<BiasEntry>, Vec<AsymmetryEntry>)> {
    let mut bias = Vec::new();
    let mut asymmetry = Vec::new();
    let families: BTreeSet<DisguiseFamily> = trials
        .iter()
        .filter_map(|t| t.disguise_meta.map(|d| d.family()))
        .collect();
    for run in runs {
        let Some(rfam) = run.restoration.family() else {
            continue;
        };
        for &family in families.iter().filter(|&&f| comparable(rfam, f)) {
            let pairs: Vec<(f64, f64)> = trials
                .iter()
                .zip(&run.outcomes)
                .filter(|(t, _)| t.label == Some(true))
                .filter_map(|(t, o)| {
                    let truth = t.disguise_meta.filter(|d| d.family() == family)?;
                    Some((o.alpha_hat?, truth.param()))
                })
                .collect();
            if pairs.is_empty() {
                continue;
            }
            let identity = family.identity();
            let side = |above: bool| {
                let errs: Vec<f64> = pairs
                    .iter()
                    .filter(|p| {
                        if above {
                            p.1 > identity
                        } else {
                            p.1 < identity
                        }
                    })
                    .map(|p| (p.0 - p.1).abs())
                    .collect();
                (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
            };
            let (above, below) = (side(true), side(false));
            asymmetry.push(AsymmetryEntry {
                restoration: run.restoration.name(),
                family,
                mean_abs_error_above: above,
                mean_abs_error_below: below,
                larger_above: above.zip(below).map(|(a, b)| a > b),
            });
            bias.push(BiasEntry {
                restoration: run.restoration.name(),
                family,
                stats: alpha_bias(&pairs)?,
            });
        }
    }
    Ok((bias, asymmetry))
}

fn per_alpha_curves(
    trials: &[Trial],
    labels: &[bool],
    runs: &[RestorationRun],
) -> Result<Vec<PerAlphaCurve>> {
    let mut specs: Vec<DisguiseSpec> = Vec::new();
    for t in trials {
        if let Some(d) = t.disguise_meta {
            if !specs.contains(&d) {
                specs.push(d);
            }
        }
    }
    specs.sort_by(|a, b| {
        a.family()
            .cmp(&b.family())
            .then(a.param().total_cmp(&b.param()))
    });
    let mut curves = Vec::new();
    for run in runs {
        let mut by_family: BTreeMap<DisguiseFamily, Vec<AlphaEer>> = BTreeMap::new();
        for spec in &specs {
            let keep = |i: usize| trials[i].disguise_meta == Some(*spec);
            let n_same = (0..trials.len()).filter(|&i| keep(i) && labels[i]).count();
            let n_diff = (0..trials.len()).filter(|&i| keep(i) && !labels[i]).count();
            if n_same == 0 || n_diff == 0 {
                continue;
            }
            let eer = eer_of(&run.outcomes, labels, keep)?;
            by_family.entry(spec.family()).or_default().push(AlphaEer {
                alpha: spec.param(),
                eer: eer.eer_percent,
                n_same,
                n_diff,
            });
        }
        for (family, points) in by_family {
            curves.push(PerAlphaCurve {
                restoration: run.restoration.name(),
                family,
                points,
            });
        }
    }
    Ok(curves)
}

/// `disguise,restoration,eer,threshold,n_same,n_diff` rows.
pub fn matrix_csv(report: &MatrixReport) -> String {
    let mut out = String::from("disguise,restoration,eer,threshold,n_same,n_diff\n");
    for r in &report.matrix {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.disguise, r.restoration, r.eer, r.threshold, r.n_same, r.n_diff
        ));
    }
    out
}

/// `alpha,eer` rows of one curve.
pub fn per_alpha_csv(curve: &PerAlphaCurve) -> String {
    let mut out = String::from("alpha,eer\n");
    for p in &curve.points {
        out.push_str(&format!("{},{}\n", p.alpha, p.eer));
    }
    out
}
