use thiserror::Error;

/// Crate-wide error type. The CLI maps variants to exit codes:
/// configuration errors exit 2, numerical/resolution failures exit 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Precondition(_) | Error::Configuration(_) => 2,
            Error::Numerical(_) | Error::Resolution(_) => 3,
            Error::Io(_) => 2,
        }
    }
}
