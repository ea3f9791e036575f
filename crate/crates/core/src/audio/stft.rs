use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{AudioBuffer, FrameParams};
use crate::error::{Error, Result};

/// Overlap-add normalization floor; only reached within a few samples of the
/// signal edges where the summed squared window vanishes.
const WSUM_FLOOR: f64 = 1e-3;

/// Framed short-time spectra, `frames x bins` in row-major order, with
/// `bins = fft_size / 2 + 1`. Bin `k` sits at normalized frequency
/// `pi * k / (bins - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    magnitudes: Vec<f64>,
    phases: Option<Vec<f64>>,
    n_frames: usize,
    n_bins: usize,
    params: FrameParams,
    sample_rate: u32,
}

impl Spectrogram {
    pub fn new(
        magnitudes: Vec<f64>,
        phases: Option<Vec<f64>>,
        n_frames: usize,
        params: FrameParams,
        sample_rate: u32,
    ) -> Result<Self> {
        let (_, _, fft) = params.resolve(sample_rate)?;
        let n_bins = fft / 2 + 1;
        if magnitudes.len() != n_frames * n_bins {
            return Err(Error::ShapeMismatch(format!(
                "{} magnitudes for {n_frames} frames x {n_bins} bins",
                magnitudes.len()
            )));
        }
        if magnitudes.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidArgument(
                "magnitudes must be finite and non-negative".into(),
            ));
        }
        if let Some(p) = &phases {
            if p.len() != magnitudes.len() {
                return Err(Error::ShapeMismatch(format!(
                    "phases have {} entries, magnitudes {}",
                    p.len(),
                    magnitudes.len()
                )));
            }
        }
        Ok(Self {
            magnitudes,
            phases,
            n_frames,
            n_bins,
            params,
            sample_rate,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn params(&self) -> FrameParams {
        self.params
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn phases(&self) -> Option<&[f64]> {
        self.phases.as_deref()
    }

    pub fn magnitude_frame(&self, frame: usize) -> &[f64] {
        &self.magnitudes[frame * self.n_bins..(frame + 1) * self.n_bins]
    }

    pub fn phase_frame(&self, frame: usize) -> Option<&[f64]> {
        self.phases
            .as_ref()
            .map(|p| &p[frame * self.n_bins..(frame + 1) * self.n_bins])
    }

    /// Drops the phases, keeping only magnitudes.
    pub fn without_phases(mut self) -> Self {
        self.phases = None;
        self
    }

    /// Normalized frequency in radians of bin `k`.
    pub fn bin_frequency(&self, k: usize) -> f64 {
        std::f64::consts::PI * k as f64 / (self.n_bins - 1) as f64
    }

    /// Length in samples of the signal this spectrogram resynthesizes to.
    pub fn signal_len(&self) -> usize {
        let (window, hop, _) = self
            .params
            .resolve(self.sample_rate)
            .expect("validated at construction");
        (self.n_frames - 1) * hop + window
    }
}

/// FFT plans and window shared by analysis and synthesis passes.
pub(crate) struct StftEngine {
    window: Vec<f64>,
    win_len: usize,
    hop: usize,
    fft_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl StftEngine {
    pub(crate) fn new(params: &FrameParams, sample_rate: u32) -> Result<Self> {
        let (win_len, hop, fft_len) = params.resolve(sample_rate)?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            window: params.window.coefficients(win_len),
            win_len,
            hop,
            fft_len,
            forward: planner.plan_fft_forward(fft_len),
            inverse: planner.plan_fft_inverse(fft_len),
        })
    }

    pub(crate) fn n_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Complex half spectra, frames x bins.
    pub(crate) fn analyze(&self, samples: &[f64]) -> Result<(usize, Vec<Complex<f64>>)> {
        if samples.len() < self.win_len {
            return Err(Error::TooShort {
                needed: self.win_len,
                got: samples.len(),
            });
        }
        let n_frames = 1 + (samples.len() - self.win_len) / self.hop;
        let n_bins = self.n_bins();
        let mut out = Vec::with_capacity(n_frames * n_bins);
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        for f in 0..n_frames {
            let start = f * self.hop;
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for (n, (x, w)) in samples[start..start + self.win_len]
                .iter()
                .zip(&self.window)
                .enumerate()
            {
                buf[n].re = x * w;
            }
            self.forward.process(&mut buf);
            out.extend_from_slice(&buf[..n_bins]);
        }
        Ok((n_frames, out))
    }

    /// Weighted overlap-add with the analysis window, normalized by the summed
    /// squared window (least-squares inverse of `analyze`).
    pub(crate) fn synthesize(&self, n_frames: usize, spectra: &[Complex<f64>]) -> Vec<f64> {
        let n_bins = self.n_bins();
        let len = (n_frames - 1) * self.hop + self.win_len;
        let mut out = vec![0.0; len];
        let mut wsum = vec![0.0; len];
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        let scale = 1.0 / self.fft_len as f64;
        for f in 0..n_frames {
            let half = &spectra[f * n_bins..(f + 1) * n_bins];
            buf[..n_bins].copy_from_slice(half);
            // DC and Nyquist of a real signal are real.
            buf[0].im = 0.0;
            buf[n_bins - 1].im = 0.0;
            for k in 1..n_bins - 1 {
                buf[self.fft_len - k] = half[k].conj();
            }
            self.inverse.process(&mut buf);
            let start = f * self.hop;
            for n in 0..self.win_len {
                let w = self.window[n];
                out[start + n] += buf[n].re * scale * w;
                wsum[start + n] += w * w;
            }
        }
        for (o, w) in out.iter_mut().zip(&wsum) {
            *o /= w.max(WSUM_FLOOR);
        }
        out
    }
}

/// Short-time Fourier transform with magnitudes and phases.
/// Frames: `1 + floor((len - window) / hop)`, no padding.
pub fn stft(buf: &AudioBuffer, params: &FrameParams) -> Result<Spectrogram> {
    let engine = StftEngine::new(params, buf.sample_rate())?;
    let (n_frames, spectra) = engine.analyze(buf.samples())?;
    let magnitudes = spectra.iter().map(|c| c.norm()).collect();
    let phases = spectra.iter().map(|c| c.arg()).collect();
    Spectrogram::new(
        magnitudes,
        Some(phases),
        n_frames,
        *params,
        buf.sample_rate(),
    )
}

/// Inverse of [`stft`]; needs phases.
pub fn istft(spec: &Spectrogram) -> Result<AudioBuffer> {
    let phases = spec.phases().ok_or(Error::MissingPhases)?;
    let engine = StftEngine::new(&spec.params(), spec.sample_rate())?;
    let spectra: Vec<Complex<f64>> = spec
        .magnitudes()
        .iter()
        .zip(phases)
        .map(|(&m, &p)| Complex::from_polar(m, p))
        .collect();
    let samples = engine.synthesize(spec.n_frames(), &spectra);
    AudioBuffer::new(samples, spec.sample_rate())
}
