use thiserror::Error;

use crate::domain::DomainError;
use crate::expr::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("derivatives of order {needed} required, field carries order {have}")]
    MissingDerivatives { needed: usize, have: usize },
    #[error("stencil construction failed at node {node}: {reason}")]
    Stencil { node: usize, reason: String },
    #[error("linear solve failed: {reason} (residual {residual:e})")]
    Solve { reason: String, residual: f64 },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
