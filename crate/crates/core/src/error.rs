use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("hamiltonian does not conserve excitation number (max |[H, N]| = {0:e})")]
    NotConserving(f64),

    #[error("not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("unreachable coupling: {0}")]
    Unreachable(String),

    #[error("optimizer diverged: {0}")]
    Divergence(String),

    #[error("fit is unreliable: {0}")]
    UnreliableFit(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
