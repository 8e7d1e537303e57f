use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("bad magic {found:?}, expected \"SEGT\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported tensor format version {0}")]
    UnsupportedVersion(u8),

    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),

    #[error("truncated tensor: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("tensor kind mismatch: {0}")]
    TensorKind(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("synthetic generation failed: {0}")]
    Generation(String),

    #[error("empty surface")]
    EmptySurface,

    #[error("non-finite value at epoch {epoch}, batch {batch}: {what}")]
    NonFinite {
        epoch: usize,
        batch: usize,
        what: String,
    },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("dataset: {0}")]
    Dataset(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
