//! C ABI over the `voxrestore` library.
//!
//! Audio lives behind the opaque [`VrAudio`] handle. Every fallible call
//! returns a [`VrStatus`]; on failure, [`vr_last_error_message`] describes
//! the most recent error on the calling thread. Strings handed out by the
//! library are released with [`vr_string_free`], handles with
//! [`vr_audio_free`]. Panics never cross the boundary: they surface as
//! `VR_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use voxrestore::asv::ScorerConfig;
use voxrestore::audio::{load_wav, save_wav_with_format, AudioBuffer, SampleFormat};
use voxrestore::disguise::{self, DisguiseFamily, DisguiseSpec};
use voxrestore::eval::compute_eer;
use voxrestore::restore::{
    default_grid, f0_ratio_alpha_hat, grid_search_restore, GridSpec, Utterance,
};
use voxrestore::Error;

/// Result code of every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    OutOfRange = 4,
    Io = 5,
    Format = 6,
    Unvoiced = 7,
    InsufficientData = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Opaque mono audio buffer.
pub struct VrAudio {
    inner: AudioBuffer,
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0} is null")]
    Null(&'static str),
    #[error("{0} is not valid UTF-8")]
    Utf8(&'static str),
    #[error("output buffer holds {capacity} samples, need {needed}")]
    BufferTooSmall { capacity: usize, needed: usize },
}

impl Failure {
    fn status(&self) -> VrStatus {
        match self {
            Failure::Null(_) => VrStatus::NullPointer,
            Failure::Utf8(_) => VrStatus::InvalidUtf8,
            Failure::BufferTooSmall { .. } => VrStatus::BufferTooSmall,
            Failure::Core(e) => match e {
                Error::Io { .. } => VrStatus::Io,
                Error::Wav { .. }
                | Error::UnsupportedCodec { .. }
                | Error::EmbeddingFile { .. } => VrStatus::Format,
                Error::OutOfRange { .. } => VrStatus::OutOfRange,
                Error::Unvoiced => VrStatus::Unvoiced,
                Error::TooShort { .. }
                | Error::EmptyAudio
                | Error::EmptyInput(_)
                | Error::InsufficientVoicedContent { .. } => VrStatus::InsufficientData,
                _ => VrStatus::InvalidArgument,
            },
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

/// Runs `body`, recording any error or panic for [`vr_last_error_message`].
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> VrStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            VrStatus::Ok
        }
        Ok(Err(f)) => {
            set_last_error(f.to_string());
            f.status()
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {what}"));
            VrStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Utf8(name))
}

unsafe fn audio_arg<'a>(p: *const VrAudio, name: &'static str) -> Result<&'a AudioBuffer, Failure> {
    p.as_ref().map(|a| &a.inner).ok_or(Failure::Null(name))
}

unsafe fn put<T>(out: *mut T, value: T, name: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_handle(out: *mut *mut VrAudio, buf: AudioBuffer) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    out.write(Box::into_raw(Box::new(VrAudio { inner: buf })));
    Ok(())
}

unsafe fn scores<'a>(p: *const f64, n: usize, name: &'static str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into the library on this
/// thread.
#[no_mangle]
pub extern "C" fn vr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Copies `len` samples into a new buffer at `sample_rate` Hz.
#[no_mangle]
pub unsafe extern "C" fn vr_audio_from_samples(
    samples: *const f64,
    len: usize,
    sample_rate: u32,
    out: *mut *mut VrAudio,
) -> VrStatus {
    guard(|| {
        let data = scores(samples, len, "samples")?.to_vec();
        let buf = AudioBuffer::new(data, sample_rate)?;
        put_handle(out, buf)
    })
}

/// Reads a mono WAV file (PCM16 or 32-bit float).
#[no_mangle]
pub unsafe extern "C" fn vr_audio_load_wav(
    path: *const c_char,
    out: *mut *mut VrAudio,
) -> VrStatus {
    guard(|| {
        let buf = load_wav(str_arg(path, "path")?)?;
        put_handle(out, buf)
    })
}

/// Writes the buffer as PCM16, or 32-bit float when `float32` is non-zero.
#[no_mangle]
pub unsafe extern "C" fn vr_audio_save_wav(
    audio: *const VrAudio,
    path: *const c_char,
    float32: c_int,
) -> VrStatus {
    guard(|| {
        let format = if float32 != 0 {
            SampleFormat::Float32
        } else {
            SampleFormat::Pcm16
        };
        save_wav_with_format(audio_arg(audio, "audio")?, str_arg(path, "path")?, format)?;
        Ok(())
    })
}

/// Number of samples; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn vr_audio_len(audio: *const VrAudio) -> usize {
    audio.as_ref().map_or(0, |a| a.inner.len())
}

/// Sample rate in Hz; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn vr_audio_sample_rate(audio: *const VrAudio) -> u32 {
    audio.as_ref().map_or(0, |a| a.inner.sample_rate())
}

/// Copies all samples into `dst`, which must hold `capacity` values.
/// Fails with `VR_STATUS_BUFFER_TOO_SMALL` when it cannot hold them all.
#[no_mangle]
pub unsafe extern "C" fn vr_audio_copy_samples(
    audio: *const VrAudio,
    dst: *mut f64,
    capacity: usize,
) -> VrStatus {
    guard(|| {
        let samples = audio_arg(audio, "audio")?.samples();
        if capacity < samples.len() {
            return Err(Failure::BufferTooSmall {
                capacity,
                needed: samples.len(),
            });
        }
        if samples.is_empty() {
            return Ok(());
        }
        if dst.is_null() {
            return Err(Failure::Null("dst"));
        }
        ptr::copy_nonoverlapping(samples.as_ptr(), dst, samples.len());
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn vr_audio_free(audio: *mut VrAudio) {
    if !audio.is_null() {
        drop(Box::from_raw(audio));
    }
}

/// Applies a disguise given as `family:param`, e.g. `pitch-freq:4` or
/// `vtln-power:-0.2`.
#[no_mangle]
pub unsafe extern "C" fn vr_disguise(
    audio: *const VrAudio,
    spec: *const c_char,
    out: *mut *mut VrAudio,
) -> VrStatus {
    guard(|| {
        let spec: DisguiseSpec = str_arg(spec, "spec")?.parse()?;
        let y = disguise::disguise(audio_arg(audio, "audio")?, &spec)?;
        put_handle(out, y)
    })
}

/// `2^(alpha / 12)`.
#[no_mangle]
pub extern "C" fn vr_semitone_to_scale(alpha: f64) -> f64 {
    disguise::semitone_to_scale(alpha)
}

/// `12 log2(scale)`; `scale` must be positive and finite.
#[no_mangle]
pub unsafe extern "C" fn vr_scale_to_semitone(scale: f64, out: *mut f64) -> VrStatus {
    guard(|| put(out, disguise::scale_to_semitone(scale)?, "out"))
}

/// Grid-search restoration of `test` against `enroll` with the builtin
/// scorer. `grid` is `start:stop:step`, or null for the family's default
/// grid. On success `*json_out` receives a JSON object with `alpha_hat`,
/// `d_hat`, `family` and `per_candidate`; free it with [`vr_string_free`].
#[no_mangle]
pub unsafe extern "C" fn vr_estimate_grid(
    enroll: *const VrAudio,
    test: *const VrAudio,
    family: *const c_char,
    grid: *const c_char,
    json_out: *mut *mut c_char,
) -> VrStatus {
    guard(|| {
        let family: DisguiseFamily = str_arg(family, "family")?.parse()?;
        let grid = if grid.is_null() {
            default_grid(family)
        } else {
            GridSpec::parse(family, str_arg(grid, "grid")?)?
        };
        let result = grid_search_restore(
            Utterance::new("enroll", audio_arg(enroll, "enroll")?),
            Utterance::new("test", audio_arg(test, "test")?),
            &grid,
            &ScorerConfig::Builtin,
        )?;
        let json = serde_json::to_string(&result).map_err(Error::from)?;
        if json_out.is_null() {
            return Err(Failure::Null("json_out"));
        }
        json_out.write(CString::new(json).expect("JSON has no NUL").into_raw());
        Ok(())
    })
}

/// Pitch parameter from the ratio of mean F0s, snapped to whole semitones.
/// Fails with `VR_STATUS_UNVOICED` when either side has no voiced frames.
#[no_mangle]
pub unsafe extern "C" fn vr_estimate_f0_ratio(
    enroll: *const VrAudio,
    test: *const VrAudio,
    alpha_out: *mut f64,
) -> VrStatus {
    guard(|| {
        let alpha = f0_ratio_alpha_hat(audio_arg(enroll, "enroll")?, audio_arg(test, "test")?)?;
        put(alpha_out, alpha, "alpha_out")
    })
}

/// Equal error rate (percent) and its threshold for distance scores, where
/// smaller means more likely the same speaker.
#[no_mangle]
pub unsafe extern "C" fn vr_compute_eer(
    same: *const f64,
    n_same: usize,
    diff: *const f64,
    n_diff: usize,
    eer_percent: *mut f64,
    threshold: *mut f64,
) -> VrStatus {
    guard(|| {
        let report = compute_eer(scores(same, n_same, "same")?, scores(diff, n_diff, "diff")?)?;
        put(eer_percent, report.eer_percent, "eer_percent")?;
        put(threshold, report.threshold, "threshold")
    })
}

/// Releases a string returned by the library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn vr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
