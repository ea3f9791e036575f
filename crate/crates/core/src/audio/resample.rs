use std::f64::consts::PI;

use super::AudioBuffer;
use crate::error::{Error, Result};

const KAISER_BETA: f64 = 8.0;
const TAPS_PER_SIDE: f64 = 16.0;

/// Time-scales the waveform by `ratio` while keeping the nominal sample rate:
/// the output has `round(len / ratio)` samples, so pitch on playback is
/// multiplied by `ratio`. Band-limited windowed-sinc interpolation (Kaiser,
/// beta 8, 16 zero crossings per side); when compressing, the kernel is
/// widened to low-pass at the new Nyquist.
pub fn resample(buf: &AudioBuffer, ratio: f64) -> Result<AudioBuffer> {
    if !(0.1..=10.0).contains(&ratio) {
        return Err(Error::OutOfRange {
            what: "resample ratio".into(),
            value: ratio,
            min: 0.1,
            max: 10.0,
        });
    }
    let x = buf.samples();
    let out_len = (x.len() as f64 / ratio).round() as usize;
    let cutoff = (1.0 / ratio).min(1.0);
    let half_width = TAPS_PER_SIDE / cutoff;
    let i0_beta = bessel_i0(KAISER_BETA);

    let y = (0..out_len)
        .map(|n| {
            let t = n as f64 * ratio;
            let lo = ((t - half_width).ceil().max(0.0)) as usize;
            let hi = ((t + half_width).floor() as usize).min(x.len().saturating_sub(1));
            let mut acc = 0.0;
            for (k, &xk) in x.iter().enumerate().take(hi + 1).skip(lo) {
                let d = t - k as f64;
                let u = d / half_width;
                if u.abs() > 1.0 {
                    continue;
                }
                let win = bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / i0_beta;
                acc += xk * cutoff * sinc(cutoff * d) * win;
            }
            acc
        })
        .collect();
    AudioBuffer::new(y, buf.sample_rate())
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, len: usize) -> AudioBuffer {
        let x = (0..len)
            .map(|n| 0.5 * (2.0 * PI * freq * n as f64 / 16000.0).sin())
            .collect();
        AudioBuffer::new(x, 16000).unwrap()
    }

    /// Peak frequency by zero-padded DFT magnitude over a Hann-windowed
    /// centre segment, refined parabolically.
    fn dominant_hz(buf: &AudioBuffer) -> f64 {
        let x = buf.samples();
        let seg = &x[x.len() / 4..x.len() / 4 + 4096];
        let n = 1 << 16;
        let mut planner = rustfft::FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let mut v = vec![rustfft::num_complex::Complex::new(0.0, 0.0); n];
        for (i, s) in seg.iter().enumerate() {
            let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / seg.len() as f64).cos();
            v[i].re = s * w;
        }
        fft.process(&mut v);
        let mags: Vec<f64> = v[..n / 2].iter().map(|c| c.norm()).collect();
        let k = (1..n / 2 - 1)
            .max_by(|&a, &b| mags[a].total_cmp(&mags[b]))
            .unwrap();
        let (a, b, c) = (mags[k - 1], mags[k], mags[k + 1]);
        let delta = 0.5 * (a - c) / (a - 2.0 * b + c);
        (k as f64 + delta) * 16000.0 / n as f64
    }

    #[test]
    fn identity_ratio() {
        let x = tone(440.0, 4000);
        let y = resample(&x, 1.0).unwrap();
        assert_eq!(y.len(), x.len());
        let rms = (x
            .samples()
            .iter()
            .zip(y.samples())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / x.len() as f64)
            .sqrt();
        assert!(rms <= 1e-9, "rms {rms}");
    }

    #[test]
    fn octave_up() {
        let y = resample(&tone(200.0, 32000), 2.0).unwrap();
        assert_eq!(y.len(), 16000);
        let f = dominant_hz(&y);
        assert!((f - 400.0).abs() <= 4.0, "{f}");
    }

    #[test]
    fn four_semitones() {
        let ratio = 2f64.powf(4.0 / 12.0);
        let y = resample(&tone(200.0, 32000), ratio).unwrap();
        let f = dominant_hz(&y);
        assert!((f - 251.98).abs() <= 2.52, "{f}");
    }

    #[test]
    fn ratio_out_of_range() {
        let x = tone(200.0, 100);
        assert!(resample(&x, 0.05).is_err());
        assert!(resample(&x, 11.0).is_err());
    }

    #[test]
    fn bessel_reference_values() {
        // I0(0) = 1, I0(1) = 1.2660658777520082
        assert_eq!(bessel_i0(0.0), 1.0);
        assert!((bessel_i0(1.0) - 1.2660658777520082).abs() < 1e-14);
    }
}
