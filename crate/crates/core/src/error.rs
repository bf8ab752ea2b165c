//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: bad scalar syntax, wrong entry counts, negative
    /// weights, out-of-range parameters.
    #[error("invalid input: {0}")]
    Input(String),

    /// A distribution failed a structural check (normalization or
    /// nonsignaling) where a valid one is required.
    #[error("invalid distribution: {0}")]
    Distribution(String),

    /// A request that is syntactically fine but outside what the
    /// implementation supports (for example exact mode where the quantity
    /// is irrational, or dimensions past a guard).
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn distribution(msg: impl Into<String>) -> Self {
        Error::Distribution(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    pub fn size_guard(msg: impl Into<String>) -> Self {
        Error::SizeGuard(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
