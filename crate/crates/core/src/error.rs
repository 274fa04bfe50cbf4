use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Diagnostics carried out of an iterative solver that ran out of iterations
/// or could not make progress.
#[derive(Clone)]
pub struct SolverFailure {
    pub context: String,
    pub iterations: usize,
    pub residual: f64,
    /// Last iterate, indexed by active node.
    pub last_iterate: Vec<f64>,
}

impl fmt::Debug for SolverFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolverFailure")
            .field("context", &self.context)
            .field("iterations", &self.iterations)
            .field("residual", &self.residual)
            .field("last_iterate_len", &self.last_iterate.len())
            .finish()
    }
}

impl fmt::Display for SolverFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} did not converge after {} iterations (residual {:.3e})",
            self.context, self.iterations, self.residual
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid exponent {0}: must be finite and > 1")]
    InvalidExponent(f64),
    #[error("zero denominator: field has vanishing L^p norm")]
    ZeroDenominator,
    #[error("fields live on different domains")]
    DomainMismatch,
    #[error("negative value {value} at active node {index}")]
    NegativeValue { index: usize, value: f64 },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{0}")]
    NotConverged(Box<SolverFailure>),
    #[error("matrix is not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::NotConverged(_) | Error::NotPositiveDefinite(_))
    }

    pub(crate) fn not_converged(
        context: impl Into<String>,
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    ) -> Self {
        Error::NotConverged(Box::new(SolverFailure { context: context.into(), iterations, residual, last_iterate }))
    }
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}
