//! Semi-discrete two-scale system, backward-Euler time stepping with lagged
//! reaction, and trajectory diagnostics.

pub mod diagnostics;
pub mod discretization;
pub mod params;
pub mod problem;
pub mod state;
pub mod stepper;

use thiserror::Error;

use crate::fem::FemError;
use crate::linalg::LinalgError;

pub use diagnostics::{mass_balance, time_derivative_diagnostic, MassBalance, TimeDerivativeReport};
pub use discretization::Discretization;
pub use params::{ModelParams, ParamError, ReactionLaw};
pub use problem::{ConstantData, FnData, Forcing, Loads, ProblemData};
pub use state::TwoScaleState;
pub use stepper::{
    default_dt, reaction_load, semidiscrete_residual, steps_for, MacroInput, StepDiagnostics, Trajectory,
    TwoScaleSolver,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid parameters: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidParams(Vec<ParamError>),
    #[error("time step must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("T_final = {t_final} is not an integer multiple of dt = {dt}")]
    IncommensurateDt { dt: f64, t_final: f64 },
    #[error("dt = {dt} exceeds the reaction stability guard {limit}")]
    DtGuard { dt: f64, limit: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("trajectory needs at least {needed} states, got {found}")]
    TooFewStates { needed: usize, found: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Fem(#[from] FemError),
}
