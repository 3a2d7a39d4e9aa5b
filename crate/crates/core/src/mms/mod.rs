//! Manufactured solutions with separable analytic forcing, Bochner-norm errors,
//! convergence tables and the continuity-with-data experiment.

pub mod continuity;
pub mod eoc;
pub mod fields;
pub mod norms;
pub mod problem;

use thiserror::Error;

use crate::indicators::IndicatorError;
use crate::linalg::LinalgError;
use crate::solver::SolverError;

pub use continuity::{continuity_experiment, scalar_exchange_numerator, ContinuityReport};
pub use eoc::{eoc, EocTable};
pub use fields::{MacroField, MacroTerm, Poly, Shape, Trig, TwoScaleField, TwoScaleTerm};
pub use norms::{
    error_norms, error_norms_with, macro_projection_errors, micro_projection_errors, ErrorNorms, MacroProjectionErrors,
    MicroProjectionErrors, MACRO_FLOOR,
};
pub use problem::{make_problem, ManufacturedProblem, ProblemId, SeparableForcing, LAYER_WIDTH};

#[derive(Debug, Error)]
pub enum MmsError {
    #[error("unknown problem '{0}' (expected constant, separable-smooth or layer)")]
    UnknownProblem(String),
    #[error("a convergence table needs at least 2 levels, got {0}")]
    TooFewLevels(usize),
    #[error("mesh sizes must decrease strictly: {coarse} followed by {fine}")]
    NonMonotoneH { coarse: f64, fine: f64 },
    #[error("errors must be positive and finite, got {0}")]
    NonPositiveError(f64),
    #[error("trajectory has no states")]
    EmptyTrajectory,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
}
