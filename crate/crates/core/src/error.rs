use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model parameter violates its domain (e.g. `a >= b`, `theta` outside `[0, 1)`).
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A call argument is out of range (e.g. `n = 0`, `epsilon <= 0`).
    #[error("invalid argument: {0}")]
    Argument(String),
    /// Inputs that must agree with each other do not.
    #[error("inconsistent inputs: {0}")]
    Consistency(String),
    /// The requested operation is not available for this input.
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("insufficient history: predictor needs {needed} values, prefix has {got}")]
    InsufficientHistory { needed: usize, got: usize },
    /// No index of the path admits an evaluable loss term.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
