use thiserror::Error;

/// Errors raised by partition construction, quadrature, and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported dimension {got}: {reason}")]
    UnsupportedDimension { got: usize, reason: &'static str },
    #[error("unsupported derivative order {0} (only 0, 1 and 2 are available)")]
    UnsupportedOrder(u32),
    #[error("inadmissible exponents: {0}")]
    Inadmissible(String),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
