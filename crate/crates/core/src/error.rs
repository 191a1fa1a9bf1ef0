//! Error type shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or usage (bad field values, unknown keys, bad flags).
    #[error("config error: {0}")]
    Config(String),

    /// Problems with input data (malformed files, missing labels, out-of-range ids).
    #[error("data error: {0}")]
    Data(String),

    /// Numerical failures (non-finite values, divergence, singular systems).
    #[error("numerical error: {0}")]
    Numeric(String),

    /// Shape disagreement between tensors or between a checkpoint and a config.
    #[error("shape error: {0}")]
    Shape(String),

    /// Malformed binary/text artifact (bad magic, unsupported version, truncation).
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// Process exit code for the CLI: 1 usage/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Data(_) | Error::Format(_) | Error::Io(_) => 2,
            Error::Numeric(_) | Error::Shape(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
