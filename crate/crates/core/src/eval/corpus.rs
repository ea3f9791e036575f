//! Synthetic multi-speaker corpus: each speaker is a fixed source-filter
//! template (pitch, three formants, glottal tilt) and each utterance is a
//! train of voiced syllables with small per-utterance variation.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub n_speakers: usize,
    pub utts_per_speaker: usize,
    pub seed: u64,
    pub sample_rate: u32,
    pub duration_s: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            n_speakers: 8,
            utts_per_speaker: 5,
            seed: 0,
            sample_rate: 16000,
            duration_s: 1.5,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_speakers < 2 || self.utts_per_speaker < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 speakers with 2 utterances each, got {} x {}",
                self.n_speakers, self.utts_per_speaker
            )));
        }
        if self.sample_rate < 8000 {
            return Err(Error::InvalidArgument(format!(
                "sample rate {} Hz is below 8000 Hz",
                self.sample_rate
            )));
        }
        if !(0.5..=30.0).contains(&self.duration_s) {
            return Err(Error::OutOfRange {
                what: "utterance duration (s)".into(),
                value: self.duration_s,
                min: 0.5,
                max: 30.0,
            });
        }
        Ok(())
    }
}

/// Source-filter parameters shared by all utterances of one speaker.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeakerTemplate {
    pub id: String,
    pub f0_hz: f64,
    /// `(centre Hz, bandwidth Hz)` for F1..F3.
    pub formants: [(f64, f64); 3],
    /// One-pole low-pass coefficient shaping the glottal pulse spectrum.
    pub glottal_tilt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusUtterance {
    pub id: String,
    pub speaker: String,
    pub audio: AudioBuffer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub sample_rate: u32,
    pub utterances: Vec<CorpusUtterance>,
}

impl Corpus {
    pub fn get(&self, id: &str) -> Option<&CorpusUtterance> {
        self.utterances.iter().find(|u| u.id == id)
    }

    /// Speaker ids in first-appearance order.
    pub fn speakers(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for u in &self.utterances {
            if !out.contains(&u.speaker.as_str()) {
                out.push(&u.speaker);
            }
        }
        out
    }

    pub fn utterances_of<'a>(
        &'a self,
        speaker: &'a str,
    ) -> impl Iterator<Item = &'a CorpusUtterance> {
        self.utterances.iter().filter(move |u| u.speaker == speaker)
    }
}

/// Semitone range of the per-utterance pitch offset around the speaker mean.
const UTT_F0_SPREAD_ST: f64 = 1.5;
/// Relative per-utterance formant jitter.
const UTT_FORMANT_JITTER: f64 = 0.02;
/// Relative per-syllable formant jitter on top of the utterance values.
const SYLLABLE_FORMANT_JITTER: f64 = 0.015;
/// Background noise level relative to the peak.
const NOISE_DB: f64 = -60.0;
const PEAK: f64 = 0.9;

pub fn speaker_templates(config: &CorpusConfig) -> Result<Vec<SpeakerTemplate>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok((0..config.n_speakers)
        .map(|s| draw_template(&mut rng, format!("spk{s:02}")))
        .collect())
}

fn draw_template(rng: &mut ChaCha8Rng, id: String) -> SpeakerTemplate {
    SpeakerTemplate {
        id,
        f0_hz: rng.random_range(90.0..250.0),
        formants: [
            (
                rng.random_range(300.0..800.0),
                rng.random_range(50.0..110.0),
            ),
            (
                rng.random_range(900.0..2300.0),
                rng.random_range(70.0..150.0),
            ),
            (
                rng.random_range(2300.0..3300.0),
                rng.random_range(100.0..220.0),
            ),
        ],
        glottal_tilt: rng.random_range(0.80..0.97),
    }
}

/// Deterministic for a given config: the same seed yields bit-identical audio.
pub fn synth_corpus(config: &CorpusConfig) -> Result<Corpus> {
    let templates = speaker_templates(config)?;
    // Utterance randomness uses a stream separate from the templates so that
    // changing the utterance count leaves the speakers unchanged.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0fc0_a95e);
    let mut utterances = Vec::with_capacity(config.n_speakers * config.utts_per_speaker);
    for t in &templates {
        for u in 0..config.utts_per_speaker {
            let audio = synth_utterance(t, config, &mut rng)?;
            utterances.push(CorpusUtterance {
                id: format!("{}_u{u:02}", t.id),
                speaker: t.id.clone(),
                audio,
            });
        }
    }
    Ok(Corpus {
        sample_rate: config.sample_rate,
        utterances,
    })
}

struct Syllable {
    start: usize,
    len: usize,
    f0_from: f64,
    f0_to: f64,
    formants: [(f64, f64); 3],
}

fn synth_utterance(
    t: &SpeakerTemplate,
    config: &CorpusConfig,
    rng: &mut ChaCha8Rng,
) -> Result<AudioBuffer> {
    let sr = config.sample_rate as f64;
    let n = (config.duration_s * sr).round() as usize;
    let f0 = t.f0_hz * 2f64.powf(rng.random_range(-UTT_F0_SPREAD_ST..UTT_F0_SPREAD_ST) / 12.0);
    let formants = t.formants.map(|(c, bw)| {
        (
            c * (1.0 + rng.random_range(-UTT_FORMANT_JITTER..UTT_FORMANT_JITTER)),
            bw,
        )
    });

    let mut syllables = Vec::new();
    let mut pos = (rng.random_range(0.05..0.12) * sr) as usize;
    let tail = (0.08 * sr) as usize;
    loop {
        let len = (rng.random_range(0.15..0.30) * sr) as usize;
        if pos + len + tail > n {
            break;
        }
        let jitter = SYLLABLE_FORMANT_JITTER;
        syllables.push(Syllable {
            start: pos,
            len,
            f0_from: f0 * (1.0 + rng.random_range(-0.06..0.06)),
            f0_to: f0 * (1.0 + rng.random_range(-0.06..0.06)),
            formants: formants.map(|(c, bw)| (c * (1.0 + rng.random_range(-jitter..jitter)), bw)),
        });
        pos += len + (rng.random_range(0.04..0.10) * sr) as usize;
    }

    let mut out = vec![0.0; n];
    let mut phase = rng.random_range(0.0..1.0);
    for s in &syllables {
        let mut excitation = vec![0.0; s.len];
        for (i, e) in excitation.iter_mut().enumerate() {
            let frac = i as f64 / s.len as f64;
            phase += (s.f0_from + (s.f0_to - s.f0_from) * frac) / sr;
            if phase >= 1.0 {
                phase -= 1.0;
                *e = 1.0;
            }
            // 20 ms raised-cosine onset and offset.
            let ramp = (0.02 * sr) as usize;
            let edge = i.min(s.len - 1 - i);
            if edge < ramp {
                *e *= 0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos();
            }
        }
        let mut y = one_pole(&excitation, t.glottal_tilt);
        for &(c, bw) in &s.formants {
            y = resonator(&y, c, bw, sr);
        }
        for (o, v) in out[s.start..].iter_mut().zip(&y) {
            *o += v;
        }
    }

    normalize(&mut out, PEAK);
    let noise = Normal::new(0.0, PEAK * 10f64.powf(NOISE_DB / 20.0)).expect("valid sigma");
    for o in out.iter_mut() {
        *o += noise.sample(rng);
    }
    normalize(&mut out, PEAK);
    AudioBuffer::new(out, config.sample_rate)
}

fn one_pole(x: &[f64], a: f64) -> Vec<f64> {
    let mut prev = 0.0;
    x.iter()
        .map(|&v| {
            prev = v + a * prev;
            prev
        })
        .collect()
}

/// Two-pole resonator with unit gain at DC.
fn resonator(x: &[f64], centre: f64, bandwidth: f64, sr: f64) -> Vec<f64> {
    let r = (-PI * bandwidth / sr).exp();
    let theta = 2.0 * PI * centre / sr;
    let a1 = 2.0 * r * theta.cos();
    let a2 = -r * r;
    let gain = 1.0 - a1 - a2;
    let (mut y1, mut y2) = (0.0, 0.0);
    x.iter()
        .map(|&v| {
            let y = gain * v + a1 * y1 + a2 * y2;
            y2 = y1;
            y1 = y;
            y
        })
        .collect()
}

fn normalize(x: &mut [f64], peak: f64) {
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        for v in x.iter_mut() {
            *v *= peak / m;
        }
    }
}
