use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::AudioBuffer;
use crate::error::{Error, Result};

/// On-disk sample encoding for [`save_wav_with_format`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleFormat {
    #[default]
    Pcm16,
    Float32,
}

/// Reads a RIFF/WAVE file holding 16-bit PCM or 32-bit float samples.
/// Multi-channel input is downmixed by averaging.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(source) => Error::io(path, source),
        other => Error::Wav {
            path: path.to_owned(),
            message: other.to_string(),
        },
    })?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Wav {
            path: path.to_owned(),
            message: "zero channels".into(),
        });
    }
    let wav_err = |e: hound::Error| Error::Wav {
        path: path.to_owned(),
        message: e.to_string(),
    };
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (format, bits) => {
            return Err(Error::UnsupportedCodec {
                path: path.to_owned(),
                message: format!("{format:?} {bits}-bit (need PCM16 or float32)"),
            })
        }
    };
    if interleaved.len() < channels {
        return Err(Error::EmptyAudio);
    }
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    AudioBuffer::new(samples, spec.sample_rate)
}

/// Writes 16-bit PCM. See [`save_wav_with_format`].
pub fn save_wav(buf: &AudioBuffer, path: impl AsRef<Path>) -> Result<()> {
    save_wav_with_format(buf, path, SampleFormat::Pcm16)
}

/// Writes a mono WAV file. The data goes to a temporary file next to the
/// destination and is renamed into place, so a failure never leaves a
/// partial file behind. PCM16 output is clipped to [-1, 1).
pub fn save_wav_with_format(
    buf: &AudioBuffer,
    path: impl AsRef<Path>,
    format: SampleFormat,
) -> Result<()> {
    let path = path.as_ref();
    if let Some(index) = buf.samples().iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteSample { index });
    }
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| Error::io(path, e))?;
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate(),
        bits_per_sample: match format {
            SampleFormat::Pcm16 => 16,
            SampleFormat::Float32 => 32,
        },
        sample_format: match format {
            SampleFormat::Pcm16 => hound::SampleFormat::Int,
            SampleFormat::Float32 => hound::SampleFormat::Float,
        },
    };
    let file = tmp.reopen().map_err(|e| Error::io(path, e))?;
    write_samples(BufWriter::new(file), spec, buf.samples(), format).map_err(|e| match e {
        hound::Error::IoError(source) => Error::io(path, source),
        other => Error::Wav {
            path: path.to_owned(),
            message: other.to_string(),
        },
    })?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn write_samples(
    out: BufWriter<File>,
    spec: hound::WavSpec,
    samples: &[f64],
    format: SampleFormat,
) -> std::result::Result<(), hound::Error> {
    let mut writer = hound::WavWriter::new(out, spec)?;
    match format {
        SampleFormat::Pcm16 => {
            for &s in samples {
                let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                writer.write_sample(v)?;
            }
        }
        SampleFormat::Float32 => {
            for &s in samples {
                writer.write_sample(s as f32)?;
            }
        }
    }
    writer.finalize()
}
