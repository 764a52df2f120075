use thiserror::Error;

/// Harness-level errors, split so the CLI can map them onto exit codes
/// (2 for configuration problems, 3 for numerical failures).
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

impl From<otfs_core::Error> for Error {
    fn from(e: otfs_core::Error) -> Self {
        match e {
            otfs_core::Error::Numerical(msg) => Error::Numerical(msg),
            other => Error::Config(other.to_string()),
        }
    }
}
