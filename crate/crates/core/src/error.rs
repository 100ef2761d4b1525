use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} of size {size} exceeds capacity {max}")]
    Capacity {
        what: &'static str,
        size: usize,
        max: usize,
    },

    /// The objective produced NaN or an infinity. Carries the last finite iterate.
    #[error("objective returned a non-finite value (last finite value {last_f})")]
    NonFinite { last_x: Vec<f64>, last_f: f64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
