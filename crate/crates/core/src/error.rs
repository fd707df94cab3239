use thiserror::Error;

/// Failure kinds shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Value would leave the range of plain `f64` arithmetic.
    #[error("range error: {0}")]
    Range(String),
    /// A construction or algorithm precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Operation deliberately not supported.
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    /// A finite-difference probe produced a non-finite value.
    #[error("probe failed at coordinate {index}: {reason}")]
    Probe { index: usize, reason: String },
    /// Inputs have the wrong shape (dimension mismatch, non-collinear pair, ...).
    #[error("structure error: {0}")]
    Structure(String),
}

impl Error {
    /// True for errors caused by user-supplied parameters rather than internal failure.
    pub fn is_user_facing(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Precondition(_) | Error::Structure(_) | Error::Range(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Precondition(msg()))
    }
}
