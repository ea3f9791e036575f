use std::f64::consts::PI;

use rustfft::num_complex::Complex;

use super::{semitone_to_scale, DisguiseFamily, DisguiseSpec};
use crate::audio::Spectrogram;
use crate::error::{Error, Result};

/// Knots in every warp table. `4096 + 1` puts pi/2^k exactly on the grid.
pub const WARP_KNOTS: usize = 4097;

/// A monotone map of normalized frequency, stored as a dense knot table with
/// linear interpolation. The inverse is the same table read the other way,
/// so `inverse(forward(w)) == w` holds exactly at every knot.
///
/// Pitch-scaling warps are the unclamped line `s * w`; their values may leave
/// `[0, pi]`, in which case lookups report no preimage.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpFunction {
    xs: Vec<f64>,
    ys: Vec<f64>,
    identity: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarpDirection {
    /// Output bin at `w'` takes the input at `warp^-1(w')` (applies the warp).
    Forward,
    /// Output bin at `w` takes the input at `warp(w)` (undoes the warp).
    Inverse,
}

impl WarpFunction {
    fn from_fn(f: impl Fn(f64) -> f64, pin_endpoints: bool) -> Result<Self> {
        let xs: Vec<f64> = (0..WARP_KNOTS)
            .map(|i| PI * i as f64 / (WARP_KNOTS - 1) as f64)
            .collect();
        let mut ys: Vec<f64> = xs.iter().map(|&w| f(w)).collect();
        if pin_endpoints {
            ys[0] = 0.0;
            ys[WARP_KNOTS - 1] = PI;
        }
        if let Some(i) = ys
            .windows(2)
            .position(|p| p[1].partial_cmp(&p[0]) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::InvalidArgument(format!(
                "warp is not strictly increasing at knot {i}"
            )));
        }
        Ok(Self {
            xs,
            ys,
            identity: false,
        })
    }

    pub fn identity() -> Self {
        let xs: Vec<f64> = (0..WARP_KNOTS)
            .map(|i| PI * i as f64 / (WARP_KNOTS - 1) as f64)
            .collect();
        Self {
            ys: xs.clone(),
            xs,
            identity: true,
        }
    }

    /// The pitch-scaling line `w -> s w`, for any positive `s`.
    pub fn scaling(s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale factor {s}")));
        }
        if s == 1.0 {
            return Ok(Self::identity());
        }
        Self::from_fn(|w| s * w, false)
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// The knot grid the table is defined on.
    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    /// Swaps the roles of domain and range.
    pub fn inverted(&self) -> Self {
        Self {
            xs: self.ys.clone(),
            ys: self.xs.clone(),
            identity: self.identity,
        }
    }

    /// `warp(w)`, or `None` when `w` lies outside the table's domain.
    pub fn forward(&self, w: f64) -> Option<f64> {
        interpolate(&self.xs, &self.ys, w)
    }

    /// `warp^-1(w')`, or `None` when `w'` has no preimage in the domain.
    pub fn inverse(&self, w: f64) -> Option<f64> {
        interpolate(&self.ys, &self.xs, w)
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let (first, last) = (xs[0], xs[xs.len() - 1]);
    let tol = 1e-12 * (last - first).abs().max(1.0);
    if !(x >= first - tol && x <= last + tol) {
        return None;
    }
    let x = x.clamp(first, last);
    let i = xs.partition_point(|&k| k < x);
    if xs[i] == x {
        return Some(ys[i]);
    }
    let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
    Some(y0 + (x - x0) / (x1 - x0) * (y1 - y0))
}

/// Bilinear all-pass warp: the phase of `(z - a) / (1 - a z)` on the unit circle.
fn bilinear(alpha: f64, w: f64) -> f64 {
    w + 2.0 * (alpha * w.sin() / (1.0 - alpha * w.cos())).atan()
}

fn quadratic(alpha: f64, w: f64) -> f64 {
    let r = w / PI;
    w + alpha * (r - r * r)
}

/// Power warp in the pi-normalized form `pi (w / pi)^(1 + alpha)`.
fn power(alpha: f64, w: f64) -> f64 {
    PI * (w / PI).powf(1.0 + alpha)
}

/// Piecewise-linear warp with slope factor `lambda`; the knee sits at
/// `7 pi / 8`, pulled down to `7 pi / (8 lambda)` when `lambda > 1` so the
/// first segment never overshoots pi.
fn piecewise(lambda: f64, w: f64) -> f64 {
    let knee = if lambda <= 1.0 {
        7.0 * PI / 8.0
    } else {
        7.0 * PI / (8.0 * lambda)
    };
    if w <= knee {
        lambda * w
    } else {
        lambda * knee + (PI - lambda * knee) / (PI - knee) * (w - knee)
    }
}

/// Frequency warp for a spectral disguise. Pitch families give the line
/// `s w` with `s = 2^(alpha/12)`; VTLN families are endpoint-pinned maps of
/// `[0, pi]` onto itself. The identity spec gives the exact identity table.
pub fn build_warp(spec: &DisguiseSpec) -> Result<WarpFunction> {
    let family = spec.family();
    let a = spec.param();
    family.check(a)?;
    if spec.is_identity() {
        return Ok(WarpFunction::identity());
    }
    match family {
        DisguiseFamily::PitchScaleFreq | DisguiseFamily::PitchScaleTime => {
            WarpFunction::scaling(semitone_to_scale(a))
        }
        DisguiseFamily::VtlnBilinear => WarpFunction::from_fn(|w| bilinear(a, w), true),
        DisguiseFamily::VtlnQuadratic => WarpFunction::from_fn(|w| quadratic(a, w), true),
        DisguiseFamily::VtlnPower => WarpFunction::from_fn(|w| power(a, w), true),
        DisguiseFamily::VtlnPiecewise => WarpFunction::from_fn(|w| piecewise(a, w), true),
    }
}

/// For each output bin: the fractional source bin, or `None` when the
/// preimage leaves `[0, pi]`.
pub(crate) fn source_bins(
    n_bins: usize,
    warp: &WarpFunction,
    direction: WarpDirection,
) -> Vec<Option<f64>> {
    let top = (n_bins - 1) as f64;
    (0..n_bins)
        .map(|k| {
            let w = PI * k as f64 / top;
            let src = match direction {
                WarpDirection::Forward => warp.inverse(w),
                WarpDirection::Inverse => warp.forward(w),
            }?;
            let pos = src / PI * top;
            if (-1e-9..=top + 1e-9).contains(&pos) {
                Some(pos.clamp(0.0, top))
            } else {
                None
            }
        })
        .collect()
}

/// Resamples one frame along the frequency axis. Bins with no preimage copy
/// the last in-range output bin.
pub(crate) fn warp_frame(src: &[f64], map: &[Option<f64>], out: &mut [f64]) {
    let mut last = 0.0;
    for (o, m) in out.iter_mut().zip(map) {
        *o = match m {
            Some(pos) => {
                let i = pos.floor() as usize;
                let t = pos - i as f64;
                if t == 0.0 || i + 1 >= src.len() {
                    src[i.min(src.len() - 1)]
                } else {
                    src[i] + t * (src[i + 1] - src[i])
                }
            }
            None => last,
        };
        last = *o;
    }
}

fn wrap(phase: f64) -> f64 {
    let w = (phase + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Local maxima over two neighbours on each side.
fn spectral_peaks(mag: &[f64]) -> Vec<usize> {
    let n = mag.len();
    (0..n)
        .filter(|&k| {
            mag[k] > 0.0
                && (1..=2)
                    .all(|d| (k < d || mag[k] > mag[k - d]) && (k + d >= n || mag[k] >= mag[k + d]))
        })
        .collect()
}

/// Peak-locked partial shifting. Every spectral peak carries its region of
/// influence (bounded by the magnitude minima between neighbouring peaks) to
/// the warped frequency of the peak, shifted by whole bins so the lobe keeps
/// the shape of a windowed sinusoid. Phases inside a region keep their
/// offsets from the peak; the peak accumulates a rotation that makes it
/// advance at the warped instantaneous frequency. Output bins with no
/// preimage copy the magnitude of the last bin that has one.
fn shift_partials(
    spec: &Spectrogram,
    map: &[Option<f64>],
    warp: &WarpFunction,
    direction: WarpDirection,
) -> (Vec<f64>, Vec<f64>) {
    let n_bins = spec.n_bins();
    let top = (n_bins - 1) as f64;
    let bin_w = PI / top;
    let hop = spec.params().hop_len(spec.sample_rate()) as f64;
    let last_mapped = map.iter().rposition(Option::is_some);
    let mut mags = vec![0.0; spec.magnitudes().len()];
    let mut phases = vec![0.0; spec.magnitudes().len()];
    // Rotation of the region owning each input bin in the previous frame.
    let mut prev_rotation = vec![0.0; n_bins];
    let mut rotation = vec![0.0; n_bins];
    let mut acc = vec![Complex::new(0.0, 0.0); n_bins];
    for f in 0..spec.n_frames() {
        let mag = spec.magnitude_frame(f);
        let ph = spec.phase_frame(f).expect("phases present");
        acc.fill(Complex::new(0.0, 0.0));
        rotation.fill(0.0);
        let peaks = spectral_peaks(mag);
        let mut lo = 0;
        for (j, &p) in peaks.iter().enumerate() {
            let hi = match peaks.get(j + 1) {
                Some(&next) => (p..=next)
                    .min_by(|&a, &b| mag[a].total_cmp(&mag[b]))
                    .expect("non-empty range"),
                None => n_bins - 1,
            };
            let inst = if f == 0 {
                bin_w * p as f64
            } else {
                let prev = spec.phase_frame(f - 1).expect("phases present");
                let expected = hop * bin_w * p as f64;
                bin_w * p as f64 + wrap(ph[p] - prev[p] - expected) / hop
            };
            let src = inst.clamp(0.0, PI);
            let target = match direction {
                WarpDirection::Forward => warp.forward(src),
                WarpDirection::Inverse => warp.inverse(src),
            };
            let region_end = if peaks.get(j + 1).is_some() {
                hi
            } else {
                hi + 1
            };
            let Some(target) = target else {
                lo = region_end;
                continue;
            };
            let theta = if f == 0 {
                0.0
            } else {
                wrap(prev_rotation[p] + hop * (target - inst))
            };
            let shift = (target / bin_w).round() as isize - p as isize;
            for k in lo..region_end {
                rotation[k] = theta;
                let dst = k as isize + shift;
                if (0..n_bins as isize).contains(&dst) {
                    acc[dst as usize] += Complex::from_polar(mag[k], ph[k] + theta);
                }
            }
            lo = region_end;
        }
        let out_mag = &mut mags[f * n_bins..(f + 1) * n_bins];
        let out_ph = &mut phases[f * n_bins..(f + 1) * n_bins];
        for (k, c) in acc.iter().enumerate() {
            out_mag[k] = c.norm();
            out_ph[k] = if c.norm() > 0.0 { c.arg() } else { 0.0 };
        }
        if let Some(last) = last_mapped {
            for k in last + 1..n_bins {
                out_mag[k] = out_mag[last];
                out_ph[k] = ph[k];
            }
        }
        std::mem::swap(&mut prev_rotation, &mut rotation);
    }
    (mags, phases)
}

/// Warps every frame of a spectrogram along the frequency axis.
///
/// Magnitude-only input is resampled bin by bin. With phases present the
/// result is meant for resynthesis, so partials are moved whole (see
/// [`shift_partials`]) and the output stays a consistent STFT.
pub fn apply_spectral_warp(
    spec: &Spectrogram,
    warp: &WarpFunction,
    direction: WarpDirection,
) -> Spectrogram {
    if warp.is_identity() {
        return spec.clone();
    }
    let n_bins = spec.n_bins();
    let map = source_bins(n_bins, warp, direction);
    let (mags, phases) = if spec.phases().is_some() {
        let (m, p) = shift_partials(spec, &map, warp, direction);
        (m, Some(p))
    } else {
        let mut mags = vec![0.0; spec.magnitudes().len()];
        for (f, out) in mags.chunks_exact_mut(n_bins).enumerate() {
            warp_frame(spec.magnitude_frame(f), &map, out);
        }
        (mags, None)
    };
    Spectrogram::new(
        mags,
        phases,
        spec.n_frames(),
        spec.params(),
        spec.sample_rate(),
    )
    .expect("warping preserves shape and non-negativity")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::FrameParams;
    use rustfft::num_complex::Complex;

    fn spec(family: DisguiseFamily, param: f64) -> DisguiseSpec {
        DisguiseSpec::new(family, param).unwrap()
    }

    #[test]
    fn quadratic_midpoint() {
        let w = build_warp(&spec(DisguiseFamily::VtlnQuadratic, 1.0)).unwrap();
        let v = w.forward(PI / 2.0).unwrap();
        assert!((v - (PI / 2.0 + 0.25)).abs() < 1e-12, "{v}");
    }

    #[test]
    fn bilinear_fixes_nyquist() {
        for a in [-0.3, -0.1, 0.17, 0.3] {
            let w = build_warp(&spec(DisguiseFamily::VtlnBilinear, a)).unwrap();
            assert_eq!(w.forward(PI), Some(PI));
            assert_eq!(w.forward(0.0), Some(0.0));
        }
    }

    #[test]
    fn bilinear_matches_complex_mobius() {
        // Independent route: arg((z - a) / (1 - a z)) with z = e^{iw}.
        for a in [-0.3, -0.05, 0.2] {
            for i in 1..50 {
                let w = PI * i as f64 / 50.0;
                let z = Complex::from_polar(1.0, w);
                let zp = (z - a) / (Complex::new(1.0, 0.0) - z * a);
                let expected = zp.arg().rem_euclid(2.0 * PI);
                assert!((bilinear(a, w) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn power_quarter() {
        let w = build_warp(&spec(DisguiseFamily::VtlnPower, 0.5)).unwrap();
        let v = w.forward(PI / 4.0).unwrap();
        assert!((v - 0.125 * PI).abs() < 1e-12, "{v}");
    }

    #[test]
    fn piecewise_below_knee() {
        let w = build_warp(&spec(DisguiseFamily::VtlnPiecewise, 1.2)).unwrap();
        let v = w.forward(PI / 2.0).unwrap();
        assert!((v - 0.6 * PI).abs() < 1e-12, "{v}");
        // lambda * knee stays below pi in both branches
        assert!(piecewise(1.5, 7.0 * PI / 12.0) <= PI);
        assert!((piecewise(0.5, PI) - PI).abs() < 1e-12);
    }

    #[test]
    fn identity_specs_give_identity_tables() {
        for f in DisguiseFamily::ALL {
            let w = build_warp(&DisguiseSpec::identity(f)).unwrap();
            assert!(w.is_identity());
            assert_eq!(w.knots(), w.values());
        }
    }

    #[test]
    fn bilinear_negation_composes_to_identity() {
        let fwd = build_warp(&spec(DisguiseFamily::VtlnBilinear, 0.2)).unwrap();
        let back = build_warp(&spec(DisguiseFamily::VtlnBilinear, -0.2)).unwrap();
        for &w in fwd.knots() {
            let r = back.forward(fwd.forward(w).unwrap()).unwrap();
            assert!((r - w).abs() <= 1e-6 * PI, "{w} -> {r}");
        }
    }

    fn delta_spectrogram(bin: usize) -> Spectrogram {
        let mut mags = vec![0.0; 2 * 257];
        mags[bin] = 1.0;
        mags[257 + bin] = 1.0;
        Spectrogram::new(mags, None, 2, FrameParams::default(), 16000).unwrap()
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0
    }

    #[test]
    fn octave_moves_delta_to_double_bin() {
        let w = WarpFunction::scaling(2.0).unwrap();
        for k in [10, 40, 100, 128] {
            let out = apply_spectral_warp(&delta_spectrogram(k), &w, WarpDirection::Forward);
            assert_eq!(argmax(out.magnitude_frame(0)), (2 * k).min(256));
        }
    }

    #[test]
    fn identity_is_bitwise() {
        let s = delta_spectrogram(33);
        let out = apply_spectral_warp(&s, &WarpFunction::identity(), WarpDirection::Forward);
        assert_eq!(out, s);
    }

    #[test]
    fn missing_band_is_filled_by_replication() {
        // s < 1 forward: output above s*pi has no preimage.
        let w = WarpFunction::scaling(0.5).unwrap();
        let mags: Vec<f64> = (0..257).map(|k| 1.0 + k as f64).collect();
        let s = Spectrogram::new(mags, None, 1, FrameParams::default(), 16000).unwrap();
        let out = apply_spectral_warp(&s, &w, WarpDirection::Forward);
        let frame = out.magnitude_frame(0);
        assert_eq!(frame[128], 257.0);
        assert!(frame[129..].iter().all(|&m| m == 257.0));
        assert_eq!(frame[64], 129.0);
    }

    #[test]
    fn inverse_direction_undoes_forward() {
        let mags: Vec<f64> = (0..257).map(|k| 1.5 + (k as f64 * 0.05).sin()).collect();
        let s = Spectrogram::new(mags.clone(), None, 1, FrameParams::default(), 16000).unwrap();
        for sp in [
            spec(DisguiseFamily::VtlnQuadratic, 1.4),
            spec(DisguiseFamily::VtlnPower, -0.3),
            spec(DisguiseFamily::VtlnBilinear, 0.25),
        ] {
            let w = build_warp(&sp).unwrap();
            let fwd = apply_spectral_warp(&s, &w, WarpDirection::Forward);
            let back = apply_spectral_warp(&fwd, &w, WarpDirection::Inverse);
            let num: f64 = back
                .magnitude_frame(0)
                .iter()
                .zip(&mags)
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            let den: f64 = mags.iter().map(|m| m * m).sum();
            assert!((num / den).sqrt() <= 1e-3, "{sp}: {}", (num / den).sqrt());
        }
    }

    #[test]
    fn phases_follow_magnitudes() {
        let mut mags = vec![0.0; 257];
        let mut ph = vec![0.0; 257];
        mags[20] = 1.0;
        ph[20] = 1.0;
        let s = Spectrogram::new(mags, Some(ph), 1, FrameParams::default(), 16000).unwrap();
        let w = WarpFunction::scaling(2.0).unwrap();
        let out = apply_spectral_warp(&s, &w, WarpDirection::Forward);
        assert_eq!(out.phase_frame(0).unwrap()[40], 1.0);
    }

    #[test]
    fn partials_keep_their_height() {
        let x: Vec<f64> = (0..8000)
            .map(|n| 0.5 * (2.0 * PI * 1000.0 * n as f64 / 16000.0).sin())
            .collect();
        let buf = crate::audio::AudioBuffer::new(x, 16000).unwrap();
        let s = crate::audio::stft(&buf, &FrameParams::new(25.0, 6.25)).unwrap();
        let w = WarpFunction::scaling(1.25).unwrap();
        let out = apply_spectral_warp(&s, &w, WarpDirection::Forward);
        for f in 1..s.n_frames() {
            let (a, b) = (s.magnitude_frame(f), out.magnitude_frame(f));
            assert_eq!(argmax(b), 40, "frame {f}");
            let (ha, hb) = (a[argmax(a)], b[argmax(b)]);
            assert!((hb / ha - 1.0).abs() < 0.05, "frame {f}: {ha} vs {hb}");
        }
    }
}
