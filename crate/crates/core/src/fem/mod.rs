//! Bilinear finite element spaces on the macro partition and the micro cell,
//! quadrature, and assembly of the two-scale operators.

pub mod macro_space;
pub mod micro_space;
pub mod quadrature;
pub mod system;
pub mod trace;

use thiserror::Error;

use crate::geometry::GeometryError;

pub use macro_space::{MacroQuadPoint, MacroQuadrature, MacroSpace};
pub use micro_space::{MicroQuadPoint, MicroQuadrature, MicroSpace};
pub use system::FeSystem;
pub use trace::{trace_inequality_check, TraceReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("partition is not 1-irregular; hanging-node constraints cannot be built")]
    NotOneIrregular,
    #[error("spaces are not nested")]
    NotNested,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("rho must be positive, got {0}")]
    InvalidRho(f64),
    #[error("at least one sample is required")]
    NoSamples,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
