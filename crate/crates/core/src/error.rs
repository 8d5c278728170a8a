use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while loading inputs or configuring a run.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("scenario failed validation:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("LP solver failed: {0}")]
    Solver(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for failures caused by bad inputs rather than a failed run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Invalid(_) | Error::Config(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
