//! Disguise transforms: pitch scaling in the frequency and time domains and
//! the four VTLN frequency-warping families, plus their inverses.

mod warp;

pub use warp::{apply_spectral_warp, build_warp, WarpDirection, WarpFunction, WARP_KNOTS};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::audio::{istft, resample, stft, AudioBuffer, FrameParams};
use crate::error::{Error, Result};

/// Slack allowed when checking a parameter against its family range.
const RANGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DisguiseFamily {
    PitchScaleFreq,
    PitchScaleTime,
    VtlnBilinear,
    VtlnQuadratic,
    VtlnPower,
    VtlnPiecewise,
}

impl DisguiseFamily {
    pub const ALL: [DisguiseFamily; 6] = [
        DisguiseFamily::PitchScaleFreq,
        DisguiseFamily::PitchScaleTime,
        DisguiseFamily::VtlnBilinear,
        DisguiseFamily::VtlnQuadratic,
        DisguiseFamily::VtlnPower,
        DisguiseFamily::VtlnPiecewise,
    ];

    pub const VTLN: [DisguiseFamily; 4] = [
        DisguiseFamily::VtlnBilinear,
        DisguiseFamily::VtlnQuadratic,
        DisguiseFamily::VtlnPower,
        DisguiseFamily::VtlnPiecewise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DisguiseFamily::PitchScaleFreq => "pitch-freq",
            DisguiseFamily::PitchScaleTime => "pitch-time",
            DisguiseFamily::VtlnBilinear => "vtln-bilinear",
            DisguiseFamily::VtlnQuadratic => "vtln-quadratic",
            DisguiseFamily::VtlnPower => "vtln-power",
            DisguiseFamily::VtlnPiecewise => "vtln-piecewise",
        }
    }

    /// Inclusive parameter range: semitones for pitch scaling, warp
    /// parameter for VTLN, slope factor for piecewise-linear.
    pub fn range(self) -> (f64, f64) {
        match self {
            DisguiseFamily::PitchScaleFreq | DisguiseFamily::PitchScaleTime => (-11.0, 11.0),
            DisguiseFamily::VtlnBilinear => (-0.3, 0.3),
            DisguiseFamily::VtlnQuadratic => (-2.0, 2.0),
            DisguiseFamily::VtlnPower => (-0.5, 0.5),
            DisguiseFamily::VtlnPiecewise => (0.5, 1.5),
        }
    }

    /// Parameter value that leaves the input unchanged.
    pub fn identity(self) -> f64 {
        match self {
            DisguiseFamily::VtlnPiecewise => 1.0,
            _ => 0.0,
        }
    }

    pub fn is_pitch(self) -> bool {
        matches!(
            self,
            DisguiseFamily::PitchScaleFreq | DisguiseFamily::PitchScaleTime
        )
    }

    pub fn is_vtln(self) -> bool {
        !self.is_pitch()
    }

    pub fn contains(self, param: f64) -> bool {
        let (lo, hi) = self.range();
        param.is_finite() && param >= lo - RANGE_EPS && param <= hi + RANGE_EPS
    }

    pub(crate) fn check(self, param: f64) -> Result<()> {
        if self.contains(param) {
            Ok(())
        } else {
            let (min, max) = self.range();
            Err(Error::OutOfRange {
                what: format!("{} parameter", self.name()),
                value: param,
                min,
                max,
            })
        }
    }
}

impl fmt::Display for DisguiseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DisguiseFamily {
    type Err = Error;

    /// Accepts the canonical names plus `pitch` (frequency-domain) and
    /// `power`/`bilinear`/`quadratic`/`piecewise` shorthands.
    fn from_str(s: &str) -> Result<Self> {
        let family = match s {
            "pitch" | "pitch-freq" => DisguiseFamily::PitchScaleFreq,
            "pitch-time" => DisguiseFamily::PitchScaleTime,
            "vtln-bilinear" | "bilinear" => DisguiseFamily::VtlnBilinear,
            "vtln-quadratic" | "quadratic" => DisguiseFamily::VtlnQuadratic,
            "vtln-power" | "power" => DisguiseFamily::VtlnPower,
            "vtln-piecewise" | "piecewise" => DisguiseFamily::VtlnPiecewise,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown disguise family `{other}`"
                )))
            }
        };
        Ok(family)
    }
}

impl Serialize for DisguiseFamily {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for DisguiseFamily {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A disguise family together with its parameter, written `family:param`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisguiseSpec {
    family: DisguiseFamily,
    param: f64,
}

impl DisguiseSpec {
    pub fn new(family: DisguiseFamily, param: f64) -> Result<Self> {
        family.check(param)?;
        Ok(Self { family, param })
    }

    pub fn identity(family: DisguiseFamily) -> Self {
        Self {
            family,
            param: family.identity(),
        }
    }

    pub fn family(&self) -> DisguiseFamily {
        self.family
    }

    pub fn param(&self) -> f64 {
        self.param
    }

    pub fn is_identity(&self) -> bool {
        self.param == self.family.identity()
    }
}

impl fmt::Display for DisguiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.family, self.param)
    }
}

impl FromStr for DisguiseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (family, param) = s
            .split_once(':')
            .ok_or_else(|| Error::ParseSpec(s.to_owned()))?;
        let family: DisguiseFamily = family.trim().parse()?;
        let param: f64 = param
            .trim()
            .parse()
            .map_err(|_| Error::ParseSpec(s.to_owned()))?;
        DisguiseSpec::new(family, param)
    }
}

impl Serialize for DisguiseSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DisguiseSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `s = 2^(alpha / 12)`.
pub fn semitone_to_scale(alpha: f64) -> f64 {
    (alpha / 12.0).exp2()
}

/// `alpha = 12 log2(s)`; the exact inverse of [`semitone_to_scale`].
pub fn scale_to_semitone(s: f64) -> Result<f64> {
    if s.is_nan() || s <= 0.0 || s.is_infinite() {
        return Err(Error::InvalidArgument(format!(
            "scale factor must be positive, got {s}"
        )));
    }
    Ok(12.0 * s.log2())
}

/// Resynthesis framing for spectral warps: 25 ms windows at 75% overlap.
/// Phase propagation needs the hop well below half the window, or partials
/// further than half a bin from a bin centre alias their frequency.
pub fn synthesis_frame_params() -> FrameParams {
    FrameParams::new(25.0, 6.25)
}

/// Applies a disguise with [`synthesis_frame_params`].
pub fn disguise(buf: &AudioBuffer, spec: &DisguiseSpec) -> Result<AudioBuffer> {
    disguise_with_params(buf, spec, &synthesis_frame_params())
}

/// Time-domain pitch scaling resamples (duration changes with pitch). Every
/// other family warps magnitudes and phases of the STFT and resynthesizes;
/// the output keeps the input length.
pub fn disguise_with_params(
    buf: &AudioBuffer,
    spec: &DisguiseSpec,
    params: &FrameParams,
) -> Result<AudioBuffer> {
    spec.family().check(spec.param())?;
    if spec.family() == DisguiseFamily::PitchScaleTime {
        return resample(buf, semitone_to_scale(spec.param()));
    }
    let warp = build_warp(spec)?;
    let analysed = stft(buf, params)?;
    let warped = apply_spectral_warp(&analysed, &warp, WarpDirection::Forward);
    let mut samples = istft(&warped)?.into_samples();
    samples.resize(buf.len(), 0.0);
    AudioBuffer::new(samples, buf.sample_rate())
}

/// The inverse transform of a disguise: a closed-form spec where one exists,
/// otherwise the numerically inverted warp table.
#[derive(Debug, Clone)]
pub enum InverseDisguise {
    Spec(DisguiseSpec),
    Warp(WarpFunction),
}

impl InverseDisguise {
    /// Warp that, applied in the forward direction, undoes the disguise
    /// spectrally.
    pub fn warp(&self) -> Result<WarpFunction> {
        match self {
            InverseDisguise::Spec(spec) => build_warp(spec),
            InverseDisguise::Warp(w) => Ok(w.clone()),
        }
    }
}

/// Pitch scaling and bilinear warps invert by negating the parameter;
/// quadratic, power and piecewise-linear warps invert numerically.
pub fn invert_spec(spec: &DisguiseSpec) -> Result<InverseDisguise> {
    spec.family().check(spec.param())?;
    Ok(match spec.family() {
        DisguiseFamily::PitchScaleFreq
        | DisguiseFamily::PitchScaleTime
        | DisguiseFamily::VtlnBilinear => InverseDisguise::Spec(DisguiseSpec {
            family: spec.family(),
            param: -spec.param(),
        }),
        DisguiseFamily::VtlnQuadratic
        | DisguiseFamily::VtlnPower
        | DisguiseFamily::VtlnPiecewise => InverseDisguise::Warp(build_warp(spec)?.inverted()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn semitone_examples() {
        assert_eq!(semitone_to_scale(12.0), 2.0);
        assert_eq!(semitone_to_scale(0.0), 1.0);
        assert_eq!(semitone_to_scale(-12.0), 0.5);
        assert_eq!(scale_to_semitone(2.0).unwrap(), 12.0);
        assert_eq!(scale_to_semitone(1.0).unwrap(), 0.0);
        let a = scale_to_semitone(2f64.powf(4.0 / 12.0)).unwrap();
        assert!((a - 4.0).abs() <= 1e-9);
        assert!(scale_to_semitone(0.0).is_err());
        assert!(scale_to_semitone(-1.0).is_err());
    }

    #[test]
    fn spec_parsing_and_display() {
        let s: DisguiseSpec = "pitch-freq:4".parse().unwrap();
        assert_eq!(s.family(), DisguiseFamily::PitchScaleFreq);
        assert_eq!(s.to_string(), "pitch-freq:4");
        let s: DisguiseSpec = "vtln-power:-0.25".parse().unwrap();
        assert_eq!(s.to_string(), "vtln-power:-0.25");
        let s: DisguiseSpec = "vtln-piecewise:1.2".parse().unwrap();
        assert_eq!(s.param(), 1.2);
        assert!(matches!(
            "vtln-power:0.6".parse::<DisguiseSpec>(),
            Err(Error::OutOfRange { .. })
        ));
        assert!("pitch-freq".parse::<DisguiseSpec>().is_err());
        assert!("pitch-freq:abc".parse::<DisguiseSpec>().is_err());
        assert!("reverb:1".parse::<DisguiseSpec>().is_err());
        assert!("vtln-piecewise:0".parse::<DisguiseSpec>().is_err());
    }

    #[test]
    fn family_ranges_and_identities() {
        for f in DisguiseFamily::ALL {
            assert!(f.contains(f.identity()));
            assert!(DisguiseSpec::identity(f).is_identity());
        }
        assert_eq!(DisguiseFamily::VtlnPiecewise.identity(), 1.0);
    }

    fn tone_energy(x: &[f64], hz: f64, sr: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (n, v) in x.iter().enumerate() {
            let ph = 2.0 * std::f64::consts::PI * hz * n as f64 / sr;
            re += v * ph.cos();
            im += v * ph.sin();
        }
        2.0 * (re * re + im * im) / x.len() as f64
    }

    #[test]
    fn frequency_domain_fifth_moves_a_sine() {
        let sr = 16000.0;
        let x: Vec<f64> = (0..16000)
            .map(|n| 0.5 * (2.0 * std::f64::consts::PI * 500.0 * n as f64 / sr).sin())
            .collect();
        let buf = AudioBuffer::new(x, 16000).unwrap();
        let spec = DisguiseSpec::new(DisguiseFamily::PitchScaleFreq, 7.0).unwrap();
        let y = disguise(&buf, &spec).unwrap();
        // Skip the edges, where overlap-add is not fully normalized.
        let mid = &y.samples()[800..15000];
        let total: f64 = mid.iter().map(|v| v * v).sum::<f64>();
        let moved = tone_energy(mid, 500.0 * semitone_to_scale(7.0), sr);
        assert!(moved / total > 0.8, "{}", moved / total);
    }

    #[test]
    fn frequency_domain_shift_is_tracked() {
        let sr = 16000.0;
        let x: Vec<f64> = (0..16000)
            .map(|n| {
                let t = n as f64 * 150.0 / sr;
                0.4 * (2.0 * (t - t.floor()) - 1.0)
            })
            .collect();
        let buf = AudioBuffer::new(x, 16000).unwrap();
        for (alpha, want) in [
            (7.0, 150.0 * 2f64.powf(7.0 / 12.0)),
            (-5.0, 150.0 * 2f64.powf(-5.0 / 12.0)),
        ] {
            let spec = DisguiseSpec::new(DisguiseFamily::PitchScaleFreq, alpha).unwrap();
            let y = disguise(&buf, &spec).unwrap();
            let f0 = crate::pitch::mean_f0(&crate::pitch::estimate_f0(&y).unwrap()).unwrap();
            assert!((f0 / want - 1.0).abs() < 0.03, "{alpha}: {f0} vs {want}");
        }
    }

    #[test]
    fn inverse_specs() {
        let spec = DisguiseSpec::new(DisguiseFamily::PitchScaleFreq, 4.0).unwrap();
        match invert_spec(&spec).unwrap() {
            InverseDisguise::Spec(s) => assert_eq!(s.to_string(), "pitch-freq:-4"),
            other => panic!("{other:?}"),
        }
        let spec = DisguiseSpec::new(DisguiseFamily::VtlnBilinear, 0.2).unwrap();
        assert!(
            matches!(invert_spec(&spec).unwrap(), InverseDisguise::Spec(s) if s.param() == -0.2)
        );
        let spec = DisguiseSpec::identity(DisguiseFamily::VtlnPower);
        match invert_spec(&spec).unwrap() {
            InverseDisguise::Warp(w) => assert!(w.is_identity()),
            other => panic!("{other:?}"),
        }
    }
}
