//! Error type shared across the toolkit.

use std::path::{Path, PathBuf};

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Unified error type for corpus IO, numeric routines, and model files.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// IO failure, annotated with the path that was being touched.
    /// The source is not repeated in the message so that error-chain
    /// printers don't show it twice.
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A line of an input file could not be parsed.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Two documents carry the same id.
    #[error("duplicate document id {id:?} at line {line}")]
    DuplicateId { id: String, line: usize },

    /// A binary or structured file does not match its expected layout.
    #[error("bad file format: {0}")]
    Format(String),

    /// Vector or matrix dimensions do not line up.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    /// An argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Not enough rows/observations to run the requested computation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A NaN or infinity showed up where a finite value is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Invalid configuration (bad hyperparameter, conflicting options, ...).
    #[error("invalid config: {0}")]
    Config(String),

    /// Input is structurally valid but degenerate (zero vector, empty set, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A numeric guard tripped (overflow, underflow to zero, division hazard).
    #[error("numeric guard: {0}")]
    NumericGuard(String),
}

impl Error {
    /// Wrap an IO error with the offending path.
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    /// Build a parse error for `path:line`.
    pub fn parse(path: impl AsRef<Path>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.as_ref().to_path_buf(),
            line,
            msg: msg.into(),
        }
    }
}
