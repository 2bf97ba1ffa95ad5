use std::io;

use thiserror::Error;

/// Errors surfaced by every layer of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid interval at component {index}: lower {lo} > upper {hi}")]
    InvalidInterval { index: usize, lo: f64, hi: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid config `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag used by the command-line error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::InvalidInterval { .. } => "interval",
            Error::NonFinite(_) => "non_finite",
            Error::Config { .. } | Error::Toml(_) => "config",
            Error::Usage(_) => "usage",
            Error::Checkpoint(_) => "checkpoint",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension {
            context,
            expected,
            got,
        });
    }
    Ok(())
}
