//! Speaker features, embeddings and cosine scoring.

mod mfcc;
mod sidecar;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

pub use mfcc::{
    mfcc, mfcc_from_spectrogram, FeatureMatrix, FEATURE_DIM, MIN_ACTIVE_FRAMES, N_CEPSTRA,
    N_MEL_FILTERS, PRE_EMPHASIS,
};
pub use sidecar::{load_external_embeddings, write_embeddings};

pub const EMBEDDING_DIM: usize = 2 * FEATURE_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    Builtin,
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    vector: Vec<f64>,
    source: EmbeddingSource,
    utterance_id: String,
}

impl Embedding {
    pub fn new(
        vector: Vec<f64>,
        source: EmbeddingSource,
        utterance_id: impl Into<String>,
    ) -> Result<Self> {
        if vector.is_empty() {
            return Err(Error::EmptyInput("embedding"));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("embedding must be finite".into()));
        }
        Ok(Self {
            vector,
            source,
            utterance_id: utterance_id.into(),
        })
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn source(&self) -> EmbeddingSource {
        self.source
    }

    pub fn utterance_id(&self) -> &str {
        &self.utterance_id
    }

    pub fn with_id(mut self, utterance_id: impl Into<String>) -> Self {
        self.utterance_id = utterance_id.into();
        self
    }
}

/// Mean and population standard deviation of every feature column.
pub fn embed(features: &FeatureMatrix) -> Result<Embedding> {
    let n = features.n_frames();
    if n < MIN_ACTIVE_FRAMES {
        return Err(Error::InsufficientVoicedContent {
            active: n,
            needed: MIN_ACTIVE_FRAMES,
        });
    }
    let mut mean = vec![0.0; FEATURE_DIM];
    for row in features.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut var = vec![0.0; FEATURE_DIM];
    for row in features.rows() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let mut vector = mean;
    vector.extend(var.iter().map(|s| (s / n as f64).sqrt()));
    Embedding::new(vector, EmbeddingSource::Builtin, "")
}

/// Cosine distance `1 - <a, b> / (|a| |b|)`, in `[0, 2]`.
pub fn distance(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let dot: f64 = a.vector.iter().zip(&b.vector).map(|(x, y)| x * y).sum();
    let na = a.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    if a.vector == b.vector {
        return Ok(0.0);
    }
    Ok((1.0 - dot / (na * nb)).clamp(0.0, 2.0))
}

/// Which embedding extractor scores a comparison.
#[derive(Debug, Clone, Default)]
pub enum ScorerConfig {
    /// MFCC statistics pooling computed from audio.
    #[default]
    Builtin,
    /// Precomputed embeddings looked up by utterance id.
    External(Arc<BTreeMap<String, Embedding>>),
}

impl ScorerConfig {
    pub fn external(table: BTreeMap<String, Embedding>) -> Self {
        ScorerConfig::External(Arc::new(table))
    }

    pub fn is_builtin(&self) -> bool {
        matches!(self, ScorerConfig::Builtin)
    }

    /// Embedding of an utterance: computed from `audio` in builtin mode,
    /// looked up by `id` otherwise.
    pub fn embedding(&self, id: &str, audio: Option<&AudioBuffer>) -> Result<Embedding> {
        match self {
            ScorerConfig::Builtin => {
                let audio = audio.ok_or_else(|| Error::UnknownUtterance(id.to_string()))?;
                Ok(embed(&mfcc(audio)?)?.with_id(id))
            }
            ScorerConfig::External(table) => table
                .get(id)
                .cloned()
                .ok_or_else(|| Error::UnknownUtterance(id.to_string())),
        }
    }
}
