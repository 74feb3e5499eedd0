//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or usage.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed input data, reported with its 1-based line number.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Rating outside the declared scale.
    #[error("rating {value} outside declared range [{min}, {max}] at line {line}")]
    RatingRange {
        line: usize,
        value: f64,
        min: f64,
        max: f64,
    },

    /// Input contained no usable events.
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    /// Vector/matrix dimensions do not agree.
    #[error("shape error: {0}")]
    Shape(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Training produced a non-finite quantity.
    #[error("divergence: {0}")]
    Divergence(String),

    /// An artifact does not match the upstream it claims to derive from.
    #[error("stale artifact: {0}")]
    Stale(String),

    /// Checkpoint or store bytes do not match the expected format/version.
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn divergence(msg: impl Into<String>) -> Self {
        Error::Divergence(msg.into())
    }

    pub fn stale(msg: impl Into<String>) -> Self {
        Error::Stale(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
