use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Invalid user-supplied parameters (ranges, inconsistent settings).
    #[error("configuration error: {0}")]
    Config(String),
    /// Evaluation requested outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical procedure broke down (factorization, bracketing, quadrature).
    #[error("numerical error: {0}")]
    Numerical(String),
    /// A series or fixed-point iteration failed to converge.
    #[error("no convergence after {iterations} iterations: {reason}")]
    NonConvergence {
        iterations: usize,
        reason: String,
        history: Vec<f64>,
    },
    /// The requested operation needs a capability the inputs do not provide.
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
