//! Sparse storage and the linear solvers used by every implicit step.

mod solve;
mod sparse;

use thiserror::Error;

pub use solve::{solve_cg, solve_general, solve_saddle, solve_spd, SaddleSystem, LINEAR_TOL};
pub use sparse::{dot, norm2, norm_inf, SparseMatrix, TripletBuilder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {index})")]
    NonPositivePivot { index: usize },
    #[error("iterative solve did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("linear system is singular")]
    SingularSystem,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("sparse backend: {0}")]
    Backend(String),
}
