//! Error type shared across the pipeline.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    TrainingDiverged { epoch: usize, detail: String },

    /// A file did not parse under its declared schema. `row` is the 1-based
    /// data-row index (header excluded); 0 means the failure is not tied to a
    /// specific row.
    #[error("parse error in {path} (row {row}): {detail}")]
    Parse {
        path: String,
        row: usize,
        detail: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid_argument(detail: impl Into<String>) -> Self {
        Error::InvalidArgument(detail.into())
    }

    pub fn insufficient_data(detail: impl Into<String>) -> Self {
        Error::InsufficientData(detail.into())
    }

    pub fn invalid_state(detail: impl Into<String>) -> Self {
        Error::InvalidState(detail.into())
    }

    pub fn parse(path: impl Into<String>, row: usize, detail: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            row,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable category, used by the CLI for one-line error
    /// reporting and by tests.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::InsufficientData(_) => "insufficient-data",
            Error::InvalidState(_) => "invalid-state",
            Error::TrainingDiverged { .. } => "training-diverged",
            Error::Parse { .. } => "parse",
            Error::Checkpoint(_) => "checkpoint",
            Error::Io { .. } => "io",
        }
    }
}
