use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("quadrature did not converge: estimate {estimate:.6e}, error {error:.3e}")]
    NoConvergence { estimate: f64, error: f64 },
    #[error("channel mismatch: expected {expected}, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("state used before seeding with the initial sample")]
    Unseeded,
    #[error("lookup failed: {0}")]
    Lookup(String),
    #[error("singular system at row {0}")]
    Singular(usize),
    #[error("serialization: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
