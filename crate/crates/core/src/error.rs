//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by score ingestion, model persistence, simulation and
/// training.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row at line {line}: {msg}")]
    MalformedRow { line: usize, msg: String },

    #[error("non-finite score at line {line}")]
    NonFiniteScore { line: usize },

    #[error("empty result: {0}")]
    EmptyResult(String),

    #[error("mixed partitions in input ({0}); load with a partition filter")]
    MixedPartitions(String),

    #[error("unrecognized model format version {0:?}")]
    VersionMismatch(String),

    #[error("model structure inconsistent: {0}")]
    StructureMismatch(String),

    #[error("missing score set for pair ({enroll}, {test})")]
    MissingPair { enroll: String, test: String },

    #[error("requested {requested} impostors but only {available} are available")]
    NotEnoughImpostors { requested: usize, available: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric positive definite")]
    NotSpd,

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
