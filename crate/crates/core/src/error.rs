//! Error type shared across the toolkit.

use thiserror::Error;

/// Errors raised by ingestion, numerics, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// A text input line could not be parsed. Line numbers are 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Input held no usable records.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A configuration failed schema validation.
    #[error("invalid configuration: {0}")]
    Validation(String),

    /// Node identifiers required by an operation were absent.
    #[error("unknown nodes ({}): {}", missing.len(), missing.join(", "))]
    MissingNodes { missing: Vec<String> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
