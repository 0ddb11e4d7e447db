//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("compressed MAT element unsupported; convert to CSV")]
    MatCompressed,

    #[error("no MAT variable matching {filter:?}; available: {available:?}")]
    MatVarNotFound {
        filter: String,
        available: Vec<String>,
    },

    #[error("invalid parameter {name}: {message}")]
    InvalidParam { name: &'static str, message: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("insufficient {what}: need {needed}, have {got}")]
    Insufficient {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("non-finite {what} at epoch {epoch}")]
    NonFiniteLoss { what: &'static str, epoch: usize },

    #[error("non-finite gradient in parameter block {block}")]
    NonFiniteGradient { block: String },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    /// Short machine-parsable category, used by the CLI exit line.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } | Error::Format { .. } => "parse",
            Error::MatCompressed | Error::MatVarNotFound { .. } => "mat",
            Error::InvalidParam { .. } | Error::Invalid(_) => "config",
            Error::DimMismatch { .. } | Error::Insufficient { .. } => "data",
            Error::NonFiniteLoss { .. } | Error::NonFiniteGradient { .. } => "numeric",
        }
    }
}
