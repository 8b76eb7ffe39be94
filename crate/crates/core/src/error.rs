use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the samdiag kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid feature vector: {0}")]
    InvalidFeatures(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid network state: {0}")]
    InvalidState(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("non-finite or diverging state at t = {time}")]
    BlowUp { time: f64 },

    #[error("dataset is not linearly separable")]
    NotSeparable,

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
