use super::{AudioBuffer, FrameParams};
use crate::error::Result;

pub const DEFAULT_VAD_THRESHOLD_DB: f64 = 40.0;

/// Per-frame log energy in dB of the raw (unwindowed) frame samples, using
/// the same framing as [`super::stft`]. Silent frames are `-inf`.
pub fn frame_log_energies(buf: &AudioBuffer, params: &FrameParams) -> Result<Vec<f64>> {
    let n_frames = params.frame_count(buf.len(), buf.sample_rate())?;
    let (window, hop, _) = params.resolve(buf.sample_rate())?;
    let x = buf.samples();
    Ok((0..n_frames)
        .map(|f| {
            let e: f64 = x[f * hop..f * hop + window].iter().map(|s| s * s).sum();
            10.0 * e.log10()
        })
        .collect())
}

/// Energy VAD with the default 40 dB threshold.
pub fn vad(buf: &AudioBuffer, params: &FrameParams) -> Result<Vec<bool>> {
    vad_with_threshold(buf, params, DEFAULT_VAD_THRESHOLD_DB)
}

/// A frame is active iff its log energy exceeds the utterance maximum minus
/// `threshold_db`. All-silent input yields an all-false mask.
pub fn vad_with_threshold(
    buf: &AudioBuffer,
    params: &FrameParams,
    threshold_db: f64,
) -> Result<Vec<bool>> {
    let energies = frame_log_energies(buf, params)?;
    let max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(vec![false; energies.len()]);
    }
    Ok(energies.iter().map(|&e| e > max - threshold_db).collect())
}
