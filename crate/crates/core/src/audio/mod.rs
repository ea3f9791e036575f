//! Audio substrate: buffers, framing, spectral analysis and synthesis,
//! resampling and voice-activity detection.

mod griffin_lim;
mod resample;
mod stft;
mod vad;
mod wav;

pub use griffin_lim::{
    griffin_lim, griffin_lim_with_trace, spectral_convergence,
    DEFAULT_ITERATIONS as GRIFFIN_LIM_ITERATIONS,
};
pub use resample::resample;
pub use stft::{istft, stft, Spectrogram};
pub use vad::{frame_log_energies, vad, vad_with_threshold, DEFAULT_VAD_THRESHOLD_DB};
pub use wav::{load_wav, save_wav, save_wav_with_format, SampleFormat};

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Mono PCM audio with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    /// Builds a buffer, rejecting non-finite samples and a zero sample rate.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidSampleRate);
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Returns a copy scaled by `gain`.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Self::new(
            self.samples.iter().map(|s| s * gain).collect(),
            self.sample_rate,
        )
    }
}

/// Tapering function applied to each analysis frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowKind {
    /// Periodic Hann.
    #[default]
    Hann,
    Rectangular,
}

impl WindowKind {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
            WindowKind::Rectangular => vec![1.0; len],
        }
    }
}

/// Framing configuration in milliseconds; converted to samples per sample rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameParams {
    pub window_ms: f64,
    pub hop_ms: f64,
    /// FFT length in samples; `None` picks the next power of two at or above
    /// the window length.
    pub fft_size: Option<usize>,
    pub window: WindowKind,
}

impl Default for FrameParams {
    fn default() -> Self {
        Self {
            window_ms: 25.0,
            hop_ms: 15.0,
            fft_size: None,
            window: WindowKind::Hann,
        }
    }
}

impl FrameParams {
    pub fn new(window_ms: f64, hop_ms: f64) -> Self {
        Self {
            window_ms,
            hop_ms,
            ..Self::default()
        }
    }

    pub fn window_len(&self, sample_rate: u32) -> usize {
        (self.window_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_len(&self, sample_rate: u32) -> usize {
        (self.hop_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn fft_len(&self, sample_rate: u32) -> usize {
        self.fft_size
            .unwrap_or_else(|| self.window_len(sample_rate).next_power_of_two())
    }

    /// Checks the invariants for a given sample rate and returns
    /// `(window, hop, fft)` lengths in samples.
    pub fn resolve(&self, sample_rate: u32) -> Result<(usize, usize, usize)> {
        if !(self.hop_ms > 0.0 && self.hop_ms <= self.window_ms) {
            return Err(Error::InvalidFrameParams(format!(
                "need 0 < hop_ms <= window_ms, got hop {} window {}",
                self.hop_ms, self.window_ms
            )));
        }
        let window = self.window_len(sample_rate);
        let hop = self.hop_len(sample_rate);
        let fft = self.fft_len(sample_rate);
        if window == 0 || hop == 0 {
            return Err(Error::InvalidFrameParams(
                "window or hop rounds to zero samples".into(),
            ));
        }
        if !fft.is_power_of_two() || fft < window {
            return Err(Error::InvalidFrameParams(format!(
                "fft size {fft} must be a power of two >= window length {window}"
            )));
        }
        Ok((window, hop, fft))
    }

    /// Number of whole frames that fit in `len` samples.
    pub fn frame_count(&self, len: usize, sample_rate: u32) -> Result<usize> {
        let (window, hop, _) = self.resolve(sample_rate)?;
        if len < window {
            return Err(Error::TooShort {
                needed: window,
                got: len,
            });
        }
        Ok(1 + (len - window) / hop)
    }
}
