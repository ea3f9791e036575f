use std::f64::consts::PI;

use crate::audio::{stft, vad, AudioBuffer, FrameParams, Spectrogram};
use crate::error::{Error, Result};

pub const N_CEPSTRA: usize = 24;
pub const FEATURE_DIM: usize = 3 * N_CEPSTRA;
pub const N_MEL_FILTERS: usize = 26;
pub const PRE_EMPHASIS: f64 = 0.97;
pub const MIN_ACTIVE_FRAMES: usize = 3;
const DELTA_WINDOW: usize = 2;
const LOG_FLOOR: f64 = 1e-30;

/// Frames x 72 features: 24 cepstra, their deltas and delta-deltas.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n_frames: usize,
    params: FrameParams,
    vad_applied: bool,
}

impl FeatureMatrix {
    pub fn new(
        data: Vec<f64>,
        n_frames: usize,
        params: FrameParams,
        vad_applied: bool,
    ) -> Result<Self> {
        if n_frames == 0 {
            return Err(Error::EmptyInput("feature matrix"));
        }
        if data.len() != n_frames * FEATURE_DIM {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {n_frames} frames x {FEATURE_DIM}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("features must be finite".into()));
        }
        Ok(Self {
            data,
            n_frames,
            params,
            vad_applied,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn width(&self) -> usize {
        FEATURE_DIM
    }

    pub fn params(&self) -> FrameParams {
        self.params
    }

    pub fn vad_applied(&self) -> bool {
        self.vad_applied
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.data[frame * FEATURE_DIM..(frame + 1) * FEATURE_DIM]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(FEATURE_DIM)
    }
}

/// MFCCs of the active frames of `buf` with the default 25 ms / 15 ms framing.
pub fn mfcc(buf: &AudioBuffer) -> Result<FeatureMatrix> {
    let params = FrameParams::default();
    let spec = stft(buf, &params)?;
    let active = vad(buf, &params)?;
    mfcc_from_spectrogram(&spec, &active)
}

/// MFCCs computed from a magnitude spectrogram, keeping the frames flagged in
/// `active`. Pre-emphasis is applied as the equivalent spectral tilt
/// `|1 - 0.97 e^{-iw}|^2` on the power spectrum, so warped magnitudes can be
/// scored without resynthesis.
pub fn mfcc_from_spectrogram(spec: &Spectrogram, active: &[bool]) -> Result<FeatureMatrix> {
    if active.len() != spec.n_frames() {
        return Err(Error::ShapeMismatch(format!(
            "activity mask has {} frames, spectrogram {}",
            active.len(),
            spec.n_frames()
        )));
    }
    let n_active = active.iter().filter(|&&a| a).count();
    if n_active < MIN_ACTIVE_FRAMES {
        return Err(Error::InsufficientVoicedContent {
            active: n_active,
            needed: MIN_ACTIVE_FRAMES,
        });
    }
    let n_bins = spec.n_bins();
    let tilt: Vec<f64> = (0..n_bins)
        .map(|k| {
            let w = spec.bin_frequency(k);
            1.0 + PRE_EMPHASIS * PRE_EMPHASIS - 2.0 * PRE_EMPHASIS * w.cos()
        })
        .collect();
    let bank = mel_filterbank(n_bins, spec.sample_rate());
    let dct = dct_matrix();

    let mut ceps = Vec::with_capacity(n_active);
    let mut log_mel = [0.0; N_MEL_FILTERS];
    for f in (0..spec.n_frames()).filter(|&f| active[f]) {
        let power: Vec<f64> = spec
            .magnitude_frame(f)
            .iter()
            .zip(&tilt)
            .map(|(m, t)| m * m * t)
            .collect();
        for (out, filter) in log_mel.iter_mut().zip(&bank) {
            let e: f64 = filter.iter().map(|&(k, w)| w * power[k]).sum();
            *out = e.max(LOG_FLOOR).ln();
        }
        let mut c = [0.0; N_CEPSTRA];
        for (ck, row) in c.iter_mut().zip(&dct) {
            *ck = row.iter().zip(&log_mel).map(|(a, b)| a * b).sum();
        }
        ceps.push(c);
    }

    let delta = deltas(&ceps);
    let delta2 = deltas(&delta);
    let mut data = Vec::with_capacity(n_active * FEATURE_DIM);
    for t in 0..n_active {
        data.extend_from_slice(&ceps[t]);
        data.extend_from_slice(&delta[t]);
        data.extend_from_slice(&delta2[t]);
    }
    FeatureMatrix::new(data, n_active, spec.params(), true)
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale from 0 Hz to Nyquist,
/// as sparse `(bin, weight)` lists.
fn mel_filterbank(n_bins: usize, sample_rate: u32) -> Vec<Vec<(usize, f64)>> {
    let nyquist = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..N_MEL_FILTERS + 2)
        .map(|i| mel_to_hz(top * i as f64 / (N_MEL_FILTERS + 1) as f64))
        .collect();
    let bin_hz = |k: usize| nyquist * k as f64 / (n_bins - 1) as f64;
    (0..N_MEL_FILTERS)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..n_bins)
                .filter_map(|k| {
                    let f = bin_hz(k);
                    let w = if f > lo && f <= mid {
                        (f - lo) / (mid - lo)
                    } else if f > mid && f < hi {
                        (hi - f) / (hi - mid)
                    } else {
                        0.0
                    };
                    (w > 0.0).then_some((k, w))
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II rows 0..24 over the 26 log-mel energies.
fn dct_matrix() -> Vec<[f64; N_MEL_FILTERS]> {
    let n = N_MEL_FILTERS as f64;
    (0..N_CEPSTRA)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            let mut row = [0.0; N_MEL_FILTERS];
            for (m, r) in row.iter_mut().enumerate() {
                *r = scale * (PI * k as f64 * (m as f64 + 0.5) / n).cos();
            }
            row
        })
        .collect()
}

/// Regression deltas over +-2 frames, clamping at the edges.
fn deltas(x: &[[f64; N_CEPSTRA]]) -> Vec<[f64; N_CEPSTRA]> {
    let last = x.len() as isize - 1;
    let norm: f64 = 2.0 * (1..=DELTA_WINDOW).map(|n| (n * n) as f64).sum::<f64>();
    (0..x.len() as isize)
        .map(|t| {
            let mut d = [0.0; N_CEPSTRA];
            for n in 1..=DELTA_WINDOW as isize {
                let ahead = &x[(t + n).min(last) as usize];
                let behind = &x[(t - n).max(0) as usize];
                for (i, di) in d.iter_mut().enumerate() {
                    *di += n as f64 * (ahead[i] - behind[i]);
                }
            }
            for di in d.iter_mut() {
                *di /= norm;
            }
            d
        })
        .collect()
}
