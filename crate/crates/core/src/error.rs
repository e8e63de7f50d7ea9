use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, PfcError>;

#[derive(Debug, Error)]
pub enum PfcError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    SpecMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown operator tag `{0}`")]
    UnknownOperator(String),

    #[error("non-finite value in solution at step {step}")]
    NonFinite { step: usize },

    #[error("{path}:{line}: {msg}")]
    Config {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("bad snapshot {path}: {msg}")]
    Snapshot { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PfcError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PfcError::Io {
            path: path.into(),
            source,
        }
    }
}
