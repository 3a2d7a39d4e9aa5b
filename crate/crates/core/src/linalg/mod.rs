//! Sparse linear algebra: CSR matrices, Kronecker operators, conjugate
//! gradients, envelope Cholesky and the coupled step solver.

pub mod block;
pub mod cg;
pub mod cholesky;
pub mod kron;
pub mod sparse;

use thiserror::Error;

pub use block::{block_solve, BlockFactors, BlockMethod, BlockOperator, BlockSolveResult};
pub use cg::{cg_solve, pcg, CgOptions, CgResult, IdentityPreconditioner, Jacobi, LinearOperator, Preconditioner};
pub use cholesky::EnvelopeCholesky;
pub use kron::{apply_macro, apply_micro, contract_micro, kron_apply, outer, KroneckerOperator};
pub use sparse::{axpy, dot, norm2, CsrMatrix, TripletBuilder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid tolerance {0}")]
    InvalidTolerance(f64),
    #[error("operator is not positive definite (step {iteration}, curvature {curvature:e})")]
    NotPositiveDefinite { iteration: usize, curvature: f64 },
    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}
