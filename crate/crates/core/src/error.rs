use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("invalid trajectory spec: {0}")]
    InvalidSpec(String),

    /// An internal invariant of the filter was violated.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    /// Malformed file or unsupported schema version.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
