use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] candle_core::Error),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("manifest {path}, line {line}: {msg}")]
    Manifest {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("clip path not found: {0}")]
    ClipNotFound(PathBuf),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("clip too short: T={0}, need at least 2 frames")]
    ClipTooShort(usize),

    #[error("unknown emotion {0:?}")]
    UnknownEmotion(String),

    #[error("degenerate mouth hull")]
    DegenerateHull,

    #[error("landmarks: {0}")]
    Landmarks(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degree out of range: {0} is not in [0, 1]")]
    DegreeOutOfRange(f64),

    #[error("emotion index {index} out of range 1..={n}")]
    EmotionIndex { index: usize, n: usize },

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),

    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: String, expected: u32 },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("non-finite loss term `{0}`")]
    NonFiniteTerm(&'static str),

    #[error("non-finite loss term `{term}` at step {step}")]
    NonFiniteLoss { term: &'static str, step: u64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
