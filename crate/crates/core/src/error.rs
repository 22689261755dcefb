use thiserror::Error;

/// Errors raised by the mechanism library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Malformed instance, bid profile, vector or allocation.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// An enumeration or brute-force budget would be exceeded.
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    /// The input is well-formed but has no meaningful normalization
    /// (all-zero bids, zero prefix mass).
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
