//! Crate-wide error type and exit-code mapping.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration or command-line usage.
    #[error("configuration error: {0}")]
    Config(String),

    /// Bad input data (values, shapes, labels).
    #[error("data error: {0}")]
    Data(String),

    /// Malformed input file, with the offending location.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },

    /// Failure while fitting a model (divergence, degenerate labels, ...).
    #[error("training error: {0}")]
    Training(String),

    /// Invariant violation inside the crate; indicates a bug.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// An error raised inside a named pipeline stage.
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 1 usage/config, 2 data, 3 training/internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Data(_) | Error::Parse { .. } | Error::Io(_) | Error::Csv(_) => 2,
            Error::Training(_) | Error::Internal(_) => 3,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}

/// Wraps a stage result so failures carry the stage name.
pub fn at_stage<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage { stage, source: Box::new(e) })
}
