//! Disguise-parameter estimation and restoration.
//!
//! A disguised test utterance `y` is restored by applying the inverse warp
//! for a candidate parameter to its spectrogram. The grid search keeps the
//! candidate whose restored embedding is closest to the enrollment embedding;
//! the F0-ratio baseline reads the parameter off the mean pitch ratio.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::asv::{distance, embed, mfcc_from_spectrogram, Embedding, FeatureMatrix, ScorerConfig};
use crate::audio::{griffin_lim, istft, stft, vad, AudioBuffer, FrameParams, Spectrogram};
use crate::disguise::{
    apply_spectral_warp, build_warp, synthesis_frame_params, DisguiseFamily, DisguiseSpec,
    WarpDirection,
};
use crate::error::{Error, Result};
use crate::pitch::{estimate_f0, f0_ratio_alpha, mean_f0};

/// Grid values are snapped to multiples of `1 / GRID_SCALE` so that parsed
/// and generated grids compare and print cleanly.
const GRID_SCALE: f64 = 1e9;

/// Candidate parameters for one restoration family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    family: DisguiseFamily,
    values: Vec<f64>,
}

impl GridSpec {
    /// Non-empty, strictly increasing, within range, and containing the
    /// family's identity.
    pub fn new(family: DisguiseFamily, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("grid"));
        }
        for &v in &values {
            family.check(v)?;
        }
        if values
            .windows(2)
            .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        {
            return Err(Error::InvalidArgument(
                "grid values must be strictly increasing".into(),
            ));
        }
        if !values.contains(&family.identity()) {
            return Err(Error::InvalidArgument(format!(
                "grid for {family} must contain the identity {}",
                family.identity()
            )));
        }
        Ok(Self { family, values })
    }

    /// `start:stop:step`, inclusive of `stop` when it lies on the lattice.
    pub fn parse(family: DisguiseFamily, text: &str) -> Result<Self> {
        if text == "default" {
            return Ok(default_grid(family));
        }
        let parts: Vec<&str> = text.split(':').collect();
        let nums = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>();
        let (start, stop, step) = match (parts.len(), nums.as_deref()) {
            (3, Some(&[a, b, s])) => (a, b, s),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "grid `{text}` is not start:stop:step"
                )))
            }
        };
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(Error::InvalidArgument(format!(
                "grid `{text}` needs step > 0 and stop >= start"
            )));
        }
        let count = ((stop - start) / step + 1e-6).floor() as usize + 1;
        let values = (0..count).map(|i| snap(start + i as f64 * step)).collect();
        Self::new(family, values)
    }

    pub fn family(&self) -> DisguiseFamily {
        self.family
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Grid value nearest to `alpha`; ties go to the smaller value.
    pub fn nearest(&self, alpha: f64) -> f64 {
        self.values
            .iter()
            .copied()
            .min_by(|a, b| (a - alpha).abs().total_cmp(&(b - alpha).abs()))
            .expect("grid is non-empty")
    }
}

fn snap(v: f64) -> f64 {
    let r = (v * GRID_SCALE).round() / GRID_SCALE;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Pitch: integer semitones -11..=11. Power: step 0.05 over +-0.5. Bilinear:
/// step 0.02 over +-0.3. Quadratic: step 0.2 over +-2. Piecewise: step 0.05
/// over 0.5..=1.5.
pub fn default_grid(family: DisguiseFamily) -> GridSpec {
    let (lo, hi, denom) = match family {
        DisguiseFamily::PitchScaleFreq | DisguiseFamily::PitchScaleTime => (-11, 11, 1.0),
        DisguiseFamily::VtlnPower => (-10, 10, 20.0),
        DisguiseFamily::VtlnBilinear => (-15, 15, 50.0),
        DisguiseFamily::VtlnQuadratic => (-10, 10, 5.0),
        DisguiseFamily::VtlnPiecewise => (10, 30, 20.0),
    };
    let values = (lo..=hi).map(|i| i as f64 / denom).collect();
    GridSpec::new(family, values).expect("default grids are valid")
}

/// A test utterance prepared for repeated restoration: its spectrogram and
/// activity mask are computed once.
#[derive(Debug, Clone)]
pub struct Restorer {
    y: AudioBuffer,
    spec: Spectrogram,
    active: Vec<bool>,
}

impl Restorer {
    pub fn new(y: &AudioBuffer) -> Result<Self> {
        let params = FrameParams::default();
        Ok(Self {
            y: y.clone(),
            spec: stft(y, &params)?.without_phases(),
            active: vad(y, &params)?,
        })
    }

    fn warped(spec: &Spectrogram, family: DisguiseFamily, alpha: f64) -> Result<Spectrogram> {
        let warp = build_warp(&DisguiseSpec::new(family, alpha)?)?;
        Ok(apply_spectral_warp(spec, &warp, WarpDirection::Inverse))
    }

    /// MFCCs of the restored magnitudes; frames keep the activity of `y`.
    pub fn features(&self, family: DisguiseFamily, alpha: f64) -> Result<FeatureMatrix> {
        let warped = Self::warped(&self.spec, family, alpha)?;
        mfcc_from_spectrogram(&warped, &self.active)
    }

    pub fn audio(
        &self,
        family: DisguiseFamily,
        alpha: f64,
        resynthesis: Resynthesis,
    ) -> Result<AudioBuffer> {
        let dense = stft(&self.y, &synthesis_frame_params())?;
        let warped = Self::warped(&dense, family, alpha)?;
        match resynthesis {
            Resynthesis::WarpedPhase => istft(&warped),
            Resynthesis::GriffinLim { iterations } => {
                griffin_lim(&warped.without_phases(), iterations)
            }
        }
    }
}

/// How restored audio is resynthesized from warped spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resynthesis {
    WarpedPhase,
    GriffinLim { iterations: usize },
}

/// Restored features of `y` under the inverse of `family` at `alpha`.
/// Time-domain pitch scaling is undone spectrally, like the other families.
pub fn restore_with(y: &AudioBuffer, alpha: f64, family: DisguiseFamily) -> Result<FeatureMatrix> {
    family.check(alpha)?;
    Restorer::new(y)?.features(family, alpha)
}

/// Restored waveform of `y`, truncated or padded to its length.
pub fn restore_audio(
    y: &AudioBuffer,
    alpha: f64,
    family: DisguiseFamily,
    resynthesis: Resynthesis,
) -> Result<AudioBuffer> {
    family.check(alpha)?;
    let mut samples = Restorer::new(y)?
        .audio(family, alpha, resynthesis)?
        .into_samples();
    samples.resize(y.len(), 0.0);
    AudioBuffer::new(samples, y.sample_rate())
}

/// An utterance as seen by a scorer: its id, and audio when available.
#[derive(Debug, Clone, Copy)]
pub struct Utterance<'a> {
    pub id: &'a str,
    pub audio: Option<&'a AudioBuffer>,
}

impl<'a> Utterance<'a> {
    pub fn new(id: &'a str, audio: &'a AudioBuffer) -> Self {
        Self {
            id,
            audio: Some(audio),
        }
    }

    fn require_audio(&self) -> Result<&'a AudioBuffer> {
        self.audio
            .ok_or_else(|| Error::UnknownUtterance(self.id.to_string()))
    }
}

/// Sidecar id of a restored candidate: `<test id>@<family>:<alpha>`.
pub fn restored_key(test_id: &str, family: DisguiseFamily, alpha: f64) -> String {
    format!("{test_id}@{family}:{alpha}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestorationResult {
    pub alpha_hat: f64,
    pub d_hat: f64,
    pub family: DisguiseFamily,
    /// `(alpha, distance)` sorted by alpha.
    pub per_candidate: Vec<(f64, f64)>,
    #[serde(skip)]
    pub restored_features: Option<FeatureMatrix>,
}

/// Scores restored candidates of one test utterance against a fixed
/// enrollment embedding.
pub struct CandidateScorer<'a> {
    enroll: Embedding,
    test: Utterance<'a>,
    restorer: Option<Restorer>,
    scorer: &'a ScorerConfig,
}

impl<'a> CandidateScorer<'a> {
    pub fn new(enroll: Embedding, test: Utterance<'a>, scorer: &'a ScorerConfig) -> Result<Self> {
        let restorer = match scorer {
            ScorerConfig::Builtin => Some(Restorer::new(test.require_audio()?)?),
            ScorerConfig::External(_) => None,
        };
        Ok(Self {
            enroll,
            test,
            restorer,
            scorer,
        })
    }

    /// Distance at `alpha`, with the restored features in builtin mode.
    pub fn score(
        &self,
        family: DisguiseFamily,
        alpha: f64,
    ) -> Result<(f64, Option<FeatureMatrix>)> {
        match &self.restorer {
            Some(r) => {
                let features = r.features(family, alpha)?;
                let d = distance(&self.enroll, &embed(&features)?)?;
                Ok((d, Some(features)))
            }
            None => {
                let key = restored_key(self.test.id, family, alpha);
                let e = self.scorer.embedding(&key, None)?;
                Ok((distance(&self.enroll, &e)?, None))
            }
        }
    }

    /// Evaluates every grid value and keeps the minimum. Equal distances
    /// prefer the value nearest the identity, then the smaller value.
    pub fn grid_search(&self, grid: &GridSpec) -> Result<RestorationResult> {
        let family = grid.family();
        let identity = family.identity();
        let mut per_candidate = Vec::with_capacity(grid.len());
        let mut best: Option<(f64, f64, Option<FeatureMatrix>)> = None;
        for &alpha in grid.values() {
            let (d, features) = self.score(family, alpha)?;
            per_candidate.push((alpha, d));
            let better = match &best {
                None => true,
                Some((ba, bd, _)) => {
                    candidate_order((alpha, d), (*ba, *bd), identity) == Ordering::Less
                }
            };
            if better {
                best = Some((alpha, d, features));
            }
        }
        let (alpha_hat, d_hat, restored_features) = best.expect("grid is non-empty");
        Ok(RestorationResult {
            alpha_hat,
            d_hat,
            family,
            per_candidate,
            restored_features,
        })
    }
}

/// Total order on `(alpha, distance)` candidates: distance, then closeness
/// to the identity, then alpha.
pub fn candidate_order(a: (f64, f64), b: (f64, f64), identity: f64) -> Ordering {
    a.1.total_cmp(&b.1)
        .then((a.0 - identity).abs().total_cmp(&(b.0 - identity).abs()))
        .then(a.0.total_cmp(&b.0))
}

/// Minimizes the enrollment-to-restored distance over `grid`.
pub fn grid_search_restore(
    x: Utterance<'_>,
    y: Utterance<'_>,
    grid: &GridSpec,
    scorer: &ScorerConfig,
) -> Result<RestorationResult> {
    let enroll = scorer.embedding(x.id, x.audio)?;
    CandidateScorer::new(enroll, y, scorer)?.grid_search(grid)
}

/// Pitch-parameter estimate from mean F0: `12 log2(f_y / f_x)` snapped to the
/// nearest integer semitone in the pitch grid.
pub fn f0_ratio_alpha_hat(x: &AudioBuffer, y: &AudioBuffer) -> Result<f64> {
    let fx = mean_f0(&estimate_f0(x)?)?;
    let fy = mean_f0(&estimate_f0(y)?)?;
    snapped_f0_ratio(fx, fy)
}

/// [`f0_ratio_alpha`] snapped to the default pitch grid.
pub fn snapped_f0_ratio(f_x: f64, f_y: f64) -> Result<f64> {
    let raw = f0_ratio_alpha(f_x, f_y)?;
    Ok(default_grid(DisguiseFamily::PitchScaleFreq).nearest(raw))
}

/// Restores with the F0-ratio estimate and scores that single candidate.
pub fn f0_ratio_restore(
    x: Utterance<'_>,
    y: Utterance<'_>,
    family: DisguiseFamily,
    scorer: &ScorerConfig,
) -> Result<RestorationResult> {
    if !family.is_pitch() {
        return Err(Error::InvalidArgument(format!(
            "F0-ratio restoration needs a pitch family, got {family}"
        )));
    }
    let alpha_hat = f0_ratio_alpha_hat(x.require_audio()?, y.require_audio()?)?;
    let enroll = scorer.embedding(x.id, x.audio)?;
    let (d_hat, restored_features) =
        CandidateScorer::new(enroll, y, scorer)?.score(family, alpha_hat)?;
    Ok(RestorationResult {
        alpha_hat,
        d_hat,
        family,
        per_candidate: vec![(alpha_hat, d_hat)],
        restored_features,
    })
}
