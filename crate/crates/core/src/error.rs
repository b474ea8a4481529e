use thiserror::Error;

use crate::code::PackingFailure;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A dimension or enumeration size exceeded its configured cap.
    #[error("capacity exceeded: {what} is {requested}, cap is {cap}")]
    Capacity {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    /// Malformed user input (channel files, configs, probability vectors).
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("packing failure: {0}")]
    Packing(Box<PackingFailure>),

    #[error("internal consistency error: {0}")]
    Consistency(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
