use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;

use super::stft::StftEngine;
use super::{AudioBuffer, Spectrogram};
use crate::error::{Error, Result};

const INIT_PHASE_SEED: u64 = 0x6c61_6d62;

/// Default iteration count.
pub const DEFAULT_ITERATIONS: usize = 32;

/// Recovers a waveform whose STFT magnitude approximates `target`
/// (any phases in `target` are ignored). Initial phases come from a fixed
/// seed, so the result is deterministic.
pub fn griffin_lim(target: &Spectrogram, iterations: usize) -> Result<AudioBuffer> {
    griffin_lim_with_trace(target, iterations, &[]).map(|(buf, _)| buf)
}

/// Like [`griffin_lim`], additionally recording the spectral-convergence
/// error after each iteration listed in `checkpoints`.
pub fn griffin_lim_with_trace(
    target: &Spectrogram,
    iterations: usize,
    checkpoints: &[usize],
) -> Result<(AudioBuffer, Vec<(usize, f64)>)> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be >= 1".into()));
    }
    let engine = StftEngine::new(&target.params(), target.sample_rate())?;
    let n_frames = target.n_frames();
    let mags = target.magnitudes();
    if mags.iter().all(|&m| m == 0.0) {
        let silence = AudioBuffer::new(vec![0.0; target.signal_len()], target.sample_rate())?;
        let trace = checkpoints.iter().map(|&c| (c, 0.0)).collect();
        return Ok((silence, trace));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(INIT_PHASE_SEED);
    let mut spectra: Vec<Complex<f64>> = mags
        .iter()
        .map(|&m| {
            Complex::from_polar(
                m,
                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            )
        })
        .collect();
    let mut trace = Vec::new();
    let mut signal = Vec::new();
    for iter in 1..=iterations {
        signal = engine.synthesize(n_frames, &spectra);
        let (_, rebuilt) = engine.analyze(&signal)?;
        if checkpoints.contains(&iter) {
            trace.push((iter, convergence(mags, &rebuilt)));
        }
        for ((s, r), &m) in spectra.iter_mut().zip(&rebuilt).zip(mags) {
            let norm = r.norm();
            *s = if norm > 0.0 {
                r * (m / norm)
            } else {
                Complex::new(m, 0.0)
            };
        }
    }
    Ok((AudioBuffer::new(signal, target.sample_rate())?, trace))
}

fn convergence(target: &[f64], rebuilt: &[Complex<f64>]) -> f64 {
    let num: f64 = target
        .iter()
        .zip(rebuilt)
        .map(|(m, r)| (r.norm() - m).powi(2))
        .sum();
    let den: f64 = target.iter().map(|m| m * m).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// `||S(x)| - A|_F / |A|_F` for a candidate waveform against target magnitudes.
pub fn spectral_convergence(target: &Spectrogram, candidate: &AudioBuffer) -> Result<f64> {
    let engine = StftEngine::new(&target.params(), target.sample_rate())?;
    let (frames, rebuilt) = engine.analyze(candidate.samples())?;
    if frames != target.n_frames() {
        return Err(Error::ShapeMismatch(format!(
            "candidate has {frames} frames, target {}",
            target.n_frames()
        )));
    }
    Ok(convergence(target.magnitudes(), &rebuilt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{stft, FrameParams};
    use std::f64::consts::PI;

    fn chirp_vowel() -> AudioBuffer {
        let sr = 16000;
        let x = (0..12000)
            .map(|n| {
                let t = n as f64 / sr as f64;
                let f0 = 140.0 + 30.0 * t;
                (1..12)
                    .map(|h| (2.0 * PI * f0 * h as f64 * t).sin() / h as f64)
                    .sum::<f64>()
                    * 0.2
            })
            .collect();
        AudioBuffer::new(x, sr).unwrap()
    }

    #[test]
    fn zero_magnitudes_give_silence() {
        let spec =
            Spectrogram::new(vec![0.0; 4 * 257], None, 4, FrameParams::default(), 16000).unwrap();
        let y = griffin_lim(&spec, 8).unwrap();
        assert_eq!(y.len(), 3 * 240 + 400);
        assert!(y.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn error_does_not_increase_at_checkpoints() {
        let spec = stft(&chirp_vowel(), &FrameParams::default())
            .unwrap()
            .without_phases();
        let (y, trace) = griffin_lim_with_trace(&spec, 32, &[1, 8, 32]).unwrap();
        assert_eq!(trace.len(), 3);
        assert!(
            trace[0].1 >= trace[1].1 && trace[1].1 >= trace[2].1,
            "{trace:?}"
        );
        let last = spectral_convergence(&spec, &y).unwrap();
        assert!(last <= trace[2].1 + 1e-12);
    }

    #[test]
    fn zero_iterations_rejected() {
        let spec =
            Spectrogram::new(vec![1.0; 257], None, 1, FrameParams::default(), 16000).unwrap();
        assert!(griffin_lim(&spec, 0).is_err());
    }
}
