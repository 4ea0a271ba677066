use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// A closed-form quantity has a zero or non-finite denominator.
    #[error("numeric degeneracy: {0}")]
    NumericDegeneracy(String),

    /// A matrix factorization failed even after the nugget floor was applied.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("duplicate record for station {station} on {date} (line {line})")]
    DuplicateRecord {
        station: String,
        date: String,
        line: u64,
    },

    #[error("resampling failed: {dropped} of {total} replicates dropped")]
    ResamplingFailure { dropped: usize, total: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
