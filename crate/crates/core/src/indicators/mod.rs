//! Elliptic projections, the local projection-error indicator, bulk marking and
//! the feedback refinement loop.

pub mod feedback;
pub mod indicator;
pub mod projection;
pub mod transfer;

use thiserror::Error;

use crate::fem::FemError;
use crate::geometry::GeometryError;
use crate::linalg::LinalgError;
use crate::solver::SolverError;

pub use feedback::{feedback_loop, projection_report, FeedbackHistory, FeedbackOptions, FeedbackStep};
pub use indicator::{error_indicator, indicator_from_local, local_projection_errors, mark, IndicatorReport, LocalErrors};
pub use projection::{elliptic_project, trapezoid, EllipticProjection, ExactMacro, MacroProjector};
pub use transfer::{micromacro_transfer_check, spearman, TransferReport};

#[derive(Debug, Error)]
pub enum IndicatorError {
    #[error("beta must lie in the open interval (0,1), got {0}")]
    InvalidBeta(f64),
    #[error("no squares to mark")]
    NoSquares,
    #[error("indicator values must be finite and non-negative, got {0}")]
    InvalidIndicator(f64),
    #[error("time nodes must be finite and non-negative, got {0}")]
    InvalidTime(f64),
    #[error("the feedback loop needs at least one iteration")]
    NoIterations,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{0}")]
    Mms(String),
}
