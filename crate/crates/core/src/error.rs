use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("singular input: {0}")]
    Singular(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("computation failed: {0}")]
    Computational(String),
}

impl Error {
    /// True for errors caused by the caller's input rather than the numerics.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::Precondition(_) | Error::Singular(_) | Error::OutOfRange(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
