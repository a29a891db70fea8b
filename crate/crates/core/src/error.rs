use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("label {label} out of range for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },

    #[error("zero-norm vector has no direction")]
    DegenerateVector,

    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(usize),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("sample {0} has no label")]
    MissingLabel(usize),

    #[error("unknown class {0:?}")]
    UnknownClass(String),

    #[error("pair ({0}, {1}) is not a valid anchor/positive pair")]
    InvalidPair(usize, usize),

    #[error("invalid contrastive batch: {0}")]
    InvalidBatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("schemas share no features")]
    NoSharedFeatures,

    #[error("cannot compute metrics over zero samples")]
    EmptyEvaluation,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::InvalidShape(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
