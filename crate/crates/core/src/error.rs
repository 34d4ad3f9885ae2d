use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Structurally invalid input (bad index, mismatched lengths, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {size} bytes is not a multiple of the {record}-byte record", path.display())]
    RecordSize {
        path: PathBuf,
        size: u64,
        record: u64,
    },

    #[error("{}: non-finite coordinate in point {index}", path.display())]
    NonFinite { path: PathBuf, index: usize },

    #[error("{}: line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {labels} labels for {points} points", path.display())]
    LabelCount {
        path: PathBuf,
        labels: usize,
        points: usize,
    },

    #[error("unknown category {0}")]
    UnknownCategory(u32),

    #[error("polygon needs at least 3 distinct vertices, got {0}")]
    DegeneratePolygon(usize),

    #[error("{0} not found")]
    NotFound(String),

    #[error("session integrity check failed: {0}")]
    Integrity(String),

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

    /// Whether the error stems from caller-supplied input rather than an
    /// internal failure.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
