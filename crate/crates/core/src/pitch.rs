//! Fundamental-frequency tracking by simplified inverse filtering (LPC
//! whitening followed by autocorrelation peak picking) and the F0-ratio
//! estimate of a pitch-scaling parameter.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::{AudioBuffer, FrameParams, WindowKind};
use crate::error::{Error, Result};

pub const MIN_F0_HZ: f64 = 50.0;
pub const MAX_F0_HZ: f64 = 500.0;
pub const LPC_ORDER: usize = 12;
/// Minimum normalized autocorrelation peak for a voiced frame.
pub const VOICING_THRESHOLD: f64 = 0.3;
/// Frames this far below the loudest frame are treated as silence.
const SILENCE_DB: f64 = 40.0;
/// Added to the zero-lag autocorrelation before solving for the predictor.
const WHITE_NOISE_CORRECTION: f64 = 0.01;
/// The residual is low-passed with a raised-cosine edge over this band (Hz)
/// before correlation; a spiky residual with a fractional period otherwise
/// splits its first peak across two lags.
const RESIDUAL_LOWPASS_HZ: (f64, f64) = (900.0, 1300.0);
/// Voiced runs shorter than this many frames are discarded as glitches.
pub const MIN_VOICED_RUN: usize = 5;
/// Length of the median smoother applied within voiced runs.
const MEDIAN_SPAN: usize = 5;
/// Candidate peaks within this fraction of the best one win if they have a
/// shorter lag, which suppresses octave-down errors.
const OCTAVE_TOLERANCE: f64 = 0.85;

/// Per-frame F0 (Hz), zero where unvoiced.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Track {
    pub f0_hz: Vec<f64>,
    pub voiced: Vec<bool>,
    pub params: FrameParams,
}

impl F0Track {
    pub fn voiced_count(&self) -> usize {
        self.voiced.iter().filter(|&&v| v).count()
    }
}

/// Analysis framing for pitch: 40 ms windows (two periods at 50 Hz), 10 ms hop.
pub fn pitch_frame_params() -> FrameParams {
    FrameParams {
        window_ms: 2000.0 / MIN_F0_HZ,
        hop_ms: 10.0,
        fft_size: None,
        window: WindowKind::Hann,
    }
}

pub fn estimate_f0(buf: &AudioBuffer) -> Result<F0Track> {
    let params = pitch_frame_params();
    let sr = buf.sample_rate() as f64;
    let (win, hop, _) = params.resolve(buf.sample_rate())?;
    if buf.len() < win {
        return Err(Error::TooShort {
            needed: win,
            got: buf.len(),
        });
    }
    let n_frames = 1 + (buf.len() - win) / hop;
    let min_lag = (sr / MAX_F0_HZ).floor().max(2.0) as usize;
    let max_lag = ((sr / MIN_F0_HZ).ceil() as usize).min(win - LPC_ORDER - 2);
    let taper = WindowKind::Hann.coefficients(win);
    let x = buf.samples();

    let energies: Vec<f64> = (0..n_frames)
        .map(|f| x[f * hop..f * hop + win].iter().map(|s| s * s).sum())
        .collect();
    let max_energy = energies.iter().copied().fold(0.0, f64::max);
    let floor = max_energy * 10f64.powf(-SILENCE_DB / 10.0);

    let corr_len = (2 * win).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(corr_len);
    let inv = planner.plan_fft_inverse(corr_len);

    let mut f0_hz = vec![0.0; n_frames];
    let mut voiced = vec![false; n_frames];
    for f in 0..n_frames {
        if max_energy == 0.0 || energies[f] <= floor {
            continue;
        }
        let frame = &x[f * hop..f * hop + win];
        let windowed: Vec<f64> = frame.iter().zip(&taper).map(|(s, w)| s * w).collect();
        let Some(lpc) = lpc_coefficients(&windowed, LPC_ORDER) else {
            continue;
        };
        let residual: Vec<f64> = (LPC_ORDER..win)
            .map(|n| {
                frame[n]
                    + lpc
                        .iter()
                        .enumerate()
                        .map(|(k, a)| a * frame[n - k - 1])
                        .sum::<f64>()
            })
            .collect();
        let smooth = lowpass(&residual, sr, &*fwd, &*inv, corr_len);
        let corr = normalized_autocorrelation(&smooth, max_lag + 1, &*fwd, &*inv, corr_len);
        if let Some(lag) = pick_period(&corr, smooth.len(), min_lag, max_lag) {
            let hz = sr / lag;
            if (MIN_F0_HZ..=MAX_F0_HZ).contains(&hz) {
                f0_hz[f] = hz;
                voiced[f] = true;
            }
        }
    }
    drop_short_runs(&mut f0_hz, &mut voiced);
    median_smooth(&mut f0_hz, &voiced);
    Ok(F0Track {
        f0_hz,
        voiced,
        params,
    })
}

fn drop_short_runs(f0_hz: &mut [f64], voiced: &mut [bool]) {
    let mut start = 0;
    while start < voiced.len() {
        if !voiced[start] {
            start += 1;
            continue;
        }
        let end = (start..voiced.len())
            .find(|&i| !voiced[i])
            .unwrap_or(voiced.len());
        if end - start < MIN_VOICED_RUN {
            voiced[start..end].fill(false);
            f0_hz[start..end].fill(0.0);
        }
        start = end;
    }
}

/// Median filter over `MEDIAN_SPAN` frames, restricted to each voiced run,
/// so isolated octave jumps do not reach the mean.
fn median_smooth(f0_hz: &mut [f64], voiced: &[bool]) {
    let raw = f0_hz.to_vec();
    let half = MEDIAN_SPAN / 2;
    let mut start = 0;
    while start < voiced.len() {
        if !voiced[start] {
            start += 1;
            continue;
        }
        let end = (start..voiced.len())
            .find(|&i| !voiced[i])
            .unwrap_or(voiced.len());
        for i in start..end {
            let mut window =
                raw[i.saturating_sub(half).max(start)..(i + half + 1).min(end)].to_vec();
            window.sort_by(f64::total_cmp);
            let m = window.len();
            f0_hz[i] = if m % 2 == 1 {
                window[m / 2]
            } else {
                0.5 * (window[m / 2 - 1] + window[m / 2])
            };
        }
        start = end;
    }
}

/// Predictor coefficients `a[1..=order]` (residual `e[n] = x[n] + sum a_k x[n-k]`)
/// by Levinson-Durbin on the autocorrelation of `x`.
fn lpc_coefficients(x: &[f64], order: usize) -> Option<Vec<f64>> {
    let mut r: Vec<f64> = (0..=order)
        .map(|lag| x.iter().zip(&x[lag..]).map(|(a, b)| a * b).sum())
        .collect();
    if r[0] <= 0.0 {
        return None;
    }
    r[0] *= 1.0 + WHITE_NOISE_CORRECTION;
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=order {
        let acc: f64 = (0..i).map(|j| a[j] * r[i - j]).sum();
        let k = -acc / err;
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if err <= 0.0 {
            return None;
        }
    }
    Some(a[1..].to_vec())
}

/// Zero-phase low-pass in the frequency domain; `len >= 2 e.len()` keeps the
/// filter tail out of the returned span.
fn lowpass(
    e: &[f64],
    sample_rate: f64,
    fwd: &dyn rustfft::Fft<f64>,
    inv: &dyn rustfft::Fft<f64>,
    len: usize,
) -> Vec<f64> {
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for (b, &v) in buf.iter_mut().zip(e) {
        b.re = v;
    }
    fwd.process(&mut buf);
    let (pass, stop) = RESIDUAL_LOWPASS_HZ;
    for (k, b) in buf.iter_mut().enumerate() {
        let bin = k.min(len - k) as f64;
        let hz = bin * sample_rate / len as f64;
        let gain = if hz <= pass {
            1.0
        } else if hz >= stop {
            0.0
        } else {
            0.5 + 0.5 * (std::f64::consts::PI * (hz - pass) / (stop - pass)).cos()
        };
        *b *= gain / len as f64;
    }
    inv.process(&mut buf);
    buf[..e.len()].iter().map(|c| c.re).collect()
}

/// `c(t) = sum e[n] e[n+t] / sum e[n]^2` for `t < n_lags`. The shrinking
/// overlap tapers long lags, which keeps noise peaks low there.
fn normalized_autocorrelation(
    e: &[f64],
    n_lags: usize,
    fwd: &dyn rustfft::Fft<f64>,
    inv: &dyn rustfft::Fft<f64>,
    len: usize,
) -> Vec<f64> {
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for (b, &v) in buf.iter_mut().zip(e) {
        b.re = v;
    }
    fwd.process(&mut buf);
    for b in buf.iter_mut() {
        *b = Complex::new(b.norm_sqr(), 0.0);
    }
    inv.process(&mut buf);
    let energy = buf[0].re;
    if energy <= 0.0 {
        return vec![0.0; n_lags.min(e.len())];
    }
    buf[..n_lags.min(e.len())]
        .iter()
        .map(|c| c.re / energy)
        .collect()
}

/// Fractional lag of the chosen autocorrelation peak, or `None` if unvoiced.
/// Voicing uses the raw peak height; candidates are ranked after undoing the
/// `1 - t/len` taper of a finite-length correlation, so long true periods are
/// not beaten by short-lag formant ripple.
fn pick_period(corr: &[f64], len: usize, min_lag: usize, max_lag: usize) -> Option<f64> {
    let hi = max_lag.min(corr.len().saturating_sub(2));
    let peaks: Vec<usize> = (min_lag.max(1)..=hi)
        .filter(|&t| corr[t] >= corr[t - 1] && corr[t] > corr[t + 1])
        .collect();
    let best = peaks
        .iter()
        .map(|&t| corr[t])
        .fold(f64::NEG_INFINITY, f64::max);
    if best.is_nan() || best < VOICING_THRESHOLD {
        return None;
    }
    let unbiased = |t: usize| corr[t] / (1.0 - t as f64 / len as f64);
    let best_unbiased = peaks
        .iter()
        .map(|&t| unbiased(t))
        .fold(f64::NEG_INFINITY, f64::max);
    let t = *peaks
        .iter()
        .find(|&&t| unbiased(t) >= OCTAVE_TOLERANCE * best_unbiased)
        .expect("best peak qualifies");
    let (a, b, c) = (corr[t - 1], corr[t], corr[t + 1]);
    let denom = a - 2.0 * b + c;
    let delta = if denom < 0.0 {
        0.5 * (a - c) / denom
    } else {
        0.0
    };
    Some(t as f64 + delta.clamp(-0.5, 0.5))
}

/// Mean F0 over voiced frames.
pub fn mean_f0(track: &F0Track) -> Result<f64> {
    let voiced: Vec<f64> = track
        .f0_hz
        .iter()
        .zip(&track.voiced)
        .filter(|(_, &v)| v)
        .map(|(&f, _)| f)
        .collect();
    if voiced.is_empty() {
        return Err(Error::Unvoiced);
    }
    Ok(voiced.iter().sum::<f64>() / voiced.len() as f64)
}

/// `12 log2(f_y / f_x)`, unrounded.
pub fn f0_ratio_alpha(f_x: f64, f_y: f64) -> Result<f64> {
    if !(f_x > 0.0 && f_y > 0.0) || !f_x.is_finite() || !f_y.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "F0 values must be positive, got {f_x} and {f_y}"
        )));
    }
    Ok(12.0 * (f_y / f_x).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    fn track(values: &[f64]) -> F0Track {
        F0Track {
            f0_hz: values.to_vec(),
            voiced: values.iter().map(|&v| v > 0.0).collect(),
            params: pitch_frame_params(),
        }
    }

    #[test]
    fn mean_examples() {
        assert_eq!(mean_f0(&track(&[200.0, 200.0, 200.0])).unwrap(), 200.0);
        assert_eq!(mean_f0(&track(&[100.0, 0.0, 300.0])).unwrap(), 200.0);
        assert!(matches!(mean_f0(&track(&[0.0, 0.0])), Err(Error::Unvoiced)));
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(f0_ratio_alpha(200.0, 400.0).unwrap(), 12.0);
        assert_eq!(f0_ratio_alpha(200.0, 200.0).unwrap(), 0.0);
        let a = f0_ratio_alpha(200.0, 200.0 * 2f64.powf(5.0 / 12.0)).unwrap();
        assert!((a - 5.0).abs() <= 1e-9);
        assert!(f0_ratio_alpha(0.0, 100.0).is_err());
        assert!(f0_ratio_alpha(100.0, -1.0).is_err());
    }

    #[test]
    fn pure_tone() {
        let x: Vec<f64> = (0..16000)
            .map(|n| 0.5 * (2.0 * PI * 200.0 * n as f64 / 16000.0).sin())
            .collect();
        let t = estimate_f0(&AudioBuffer::new(x, 16000).unwrap()).unwrap();
        assert!(t.voiced_count() > 0);
        for (&f, &v) in t.f0_hz.iter().zip(&t.voiced) {
            if v {
                assert!((f - 200.0).abs() <= 4.0, "{f}");
            }
        }
    }

    fn sawtooth(hz: f64, len: usize) -> AudioBuffer {
        let x = (0..len)
            .map(|n| {
                let ph = (hz * n as f64 / 16000.0).fract();
                0.5 * (2.0 * ph - 1.0)
            })
            .collect();
        AudioBuffer::new(x, 16000).unwrap()
    }

    #[test]
    fn sawtooth_no_octave_errors() {
        for hz in [70.0, 120.0, 180.0, 250.0, 400.0] {
            let t = estimate_f0(&sawtooth(hz, 16000)).unwrap();
            let voiced: Vec<f64> = t
                .f0_hz
                .iter()
                .zip(&t.voiced)
                .filter(|(_, &v)| v)
                .map(|(&f, _)| f)
                .collect();
            assert!(voiced.len() as f64 >= 0.9 * t.voiced.len() as f64, "{hz}");
            let good = voiced
                .iter()
                .filter(|&&f| (f - hz).abs() <= 0.02 * hz)
                .count();
            assert!(
                good as f64 >= 0.95 * voiced.len() as f64,
                "{hz}: {voiced:?}"
            );
        }
    }

    #[test]
    fn gain_invariant() {
        let a = sawtooth(150.0, 12000);
        let b = a.scaled(0.01).unwrap();
        let (ta, tb) = (estimate_f0(&a).unwrap(), estimate_f0(&b).unwrap());
        assert_eq!(ta.voiced, tb.voiced);
        for (x, y) in ta.f0_hz.iter().zip(&tb.f0_hz) {
            assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn white_noise_is_mostly_unvoiced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0, 0.2).unwrap();
        let x: Vec<f64> = (0..32000).map(|_| normal.sample(&mut rng)).collect();
        let t = estimate_f0(&AudioBuffer::new(x, 16000).unwrap()).unwrap();
        let unvoiced = t.voiced.iter().filter(|&&v| !v).count();
        assert!(
            unvoiced as f64 >= 0.9 * t.voiced.len() as f64,
            "{unvoiced}/{}",
            t.voiced.len()
        );
    }

    #[test]
    fn short_runs_are_dropped() {
        let mut voiced = vec![true, true, false, true, true, true, true, true, false, true];
        let mut f0: Vec<f64> = voiced
            .iter()
            .map(|&v| if v { 100.0 } else { 0.0 })
            .collect();
        drop_short_runs(&mut f0, &mut voiced);
        assert_eq!(
            voiced,
            [false, false, false, true, true, true, true, true, false, false]
        );
        assert_eq!(f0[0], 0.0);
        assert_eq!(f0[4], 100.0);
    }

    #[test]
    fn median_removes_isolated_jump() {
        let voiced = [true, true, true, true, true, true, false, true];
        let mut f0 = [100.0, 101.0, 480.0, 102.0, 103.0, 104.0, 0.0, 90.0];
        median_smooth(&mut f0, &voiced);
        assert_eq!(f0[2], 102.0);
        assert_eq!(f0[6], 0.0);
        assert_eq!(f0[7], 90.0);
        assert!(f0[..6].iter().all(|&f| (100.0..=104.0).contains(&f)));
    }

    #[test]
    fn too_short() {
        let buf = AudioBuffer::new(vec![0.1; 100], 16000).unwrap();
        assert!(matches!(estimate_f0(&buf), Err(Error::TooShort { .. })));
    }

    #[test]
    fn silence_is_unvoiced() {
        let buf = AudioBuffer::new(vec![0.0; 8000], 16000).unwrap();
        let t = estimate_f0(&buf).unwrap();
        assert_eq!(t.voiced_count(), 0);
        assert!(mean_f0(&t).is_err());
    }

    #[test]
    fn lpc_recovers_ar2() {
        // x[n] = 1.3 x[n-1] - 0.6 x[n-2] + noise  =>  a = [-1.3, 0.6]
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut x = vec![0.0; 20000];
        for n in 2..x.len() {
            x[n] = 1.3 * x[n - 1] - 0.6 * x[n - 2] + normal.sample(&mut rng);
        }
        let a = lpc_coefficients(&x, 2).unwrap();
        // The white-noise correction biases the estimate slightly toward zero.
        assert!((a[0] + 1.3).abs() < 0.05, "{a:?}");
        assert!((a[1] - 0.6).abs() < 0.05, "{a:?}");
    }
}
