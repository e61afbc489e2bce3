use thiserror::Error;

/// Errors raised by the laboratory's library operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("refusing to simulate {n} qubits: state vector of 2^{n} amplitudes exceeds cap of {cap} qubits")]
    TooManyQubits { n: usize, cap: usize },

    #[error("inconsistent data: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(LabError::DimensionMismatch { expected, got })
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> LabError {
    LabError::InvalidArgument(msg.into())
}
