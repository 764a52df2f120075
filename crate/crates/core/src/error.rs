use thiserror::Error;

/// Errors produced by the modulation / estimation primitives.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// Matrix or vector shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// A linear solve failed or a quantity became non-finite.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
