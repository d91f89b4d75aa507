use thiserror::Error;

use crate::arith::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("product of two perturbed values would create an ε² term")]
    SecondOrderPerturbation,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Schema or consistency violation; `path` locates the offending field.
    #[error("invalid instance at {path}: {message}")]
    InvalidInstance { path: String, message: String },
    #[error("invalid flow: {0}")]
    InvalidFlow(String),
    /// No feasible flow respects the budget. `certificate` holds Farkas
    /// multipliers for the rows of the joint feasibility program
    /// (flow conservation rows first, then one row per externality class).
    #[error("infeasible budget: {message}")]
    InfeasibleBudget { message: String, certificate: Vec<Rational> },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("path enumeration exceeded the cap of {cap} paths")]
    PathCapExceeded { cap: usize },
    #[error("negative load {0}")]
    NegativeLoad(Rational),
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error("internal solver failure: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Error {
        Error::InvalidInstance { path: path.into(), message: message.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
