use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: unreadable WAV: {message}")]
    Wav { path: PathBuf, message: String },

    #[error("{path}: unsupported codec: {message}")]
    UnsupportedCodec { path: PathBuf, message: String },

    #[error("zero-length audio")]
    EmptyAudio,

    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },

    #[error("sample rate must be positive")]
    InvalidSampleRate,

    #[error("audio too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("invalid frame parameters: {0}")]
    InvalidFrameParams(String),

    #[error("{what} = {value} is out of range [{min}, {max}]")]
    OutOfRange {
        what: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot parse disguise spec `{0}` (expected family:param)")]
    ParseSpec(String),

    #[error("spectrogram has no phases")]
    MissingPhases,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unvoiced utterance")]
    Unvoiced,

    #[error("insufficient voiced content: {active} active frames, need at least {needed}")]
    InsufficientVoicedContent { active: usize, needed: usize },

    #[error("embedding dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("zero-norm embedding")]
    ZeroNorm,

    #[error("{path}:{line}: {message}")]
    EmbeddingFile {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate utterance id `{0}`")]
    DuplicateId(String),

    #[error("unknown utterance `{0}`")]
    UnknownUtterance(String),

    #[error("{path}:{line}: malformed trial: {message}")]
    TrialFile {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("corpus too small: {0}")]
    CorpusTooSmall(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
