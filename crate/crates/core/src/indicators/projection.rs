use crate::fem::quadrature::q1_element_matrices;
use crate::fem::system::macro_h1_matrix;
use crate::fem::{FeSystem, MacroQuadrature, MacroSpace};
use crate::linalg::{CsrMatrix, EnvelopeCholesky};

use super::IndicatorError;

/// Exact macro field: `(value, gradient)` at `(t, x)`.
pub type ExactMacro<'a> = dyn Fn(f64, [f64; 2]) -> (f64, [f64; 2]) + 'a;

/// Factored `H^1(Ω)` Gram matrix of a macro space together with the quadrature
/// used for load vectors.
#[derive(Debug, Clone)]
pub struct MacroProjector {
    h1: CsrMatrix,
    factor: EnvelopeCholesky,
    quad: MacroQuadrature,
}

impl MacroProjector {
    /// `quad_level` bounds the size of the quadrature cells; 4 Gauss points per direction.
    pub fn new(space: &MacroSpace, quad_level: u8) -> Result<Self, IndicatorError> {
        let m = space.assemble(|q| q1_element_matrices(q.side()).0);
        let k = space.assemble(|q| q1_element_matrices(q.side()).1);
        let h1 = m.linear_combination(1.0, &k, 1.0);
        Self::from_parts(space, h1, quad_level)
    }

    pub fn from_system(space: &MacroSpace, sys: &FeSystem, quad_level: u8) -> Result<Self, IndicatorError> {
        Self::from_parts(space, macro_h1_matrix(sys), quad_level)
    }

    fn from_parts(space: &MacroSpace, h1: CsrMatrix, quad_level: u8) -> Result<Self, IndicatorError> {
        let factor = EnvelopeCholesky::factor(&h1)?;
        let quad = space.quadrature(quad_level.max(space.partition().max_level()), 4);
        Ok(Self { h1, factor, quad })
    }

    pub fn quadrature(&self) -> &MacroQuadrature {
        &self.quad
    }

    /// `M + K` of the space.
    pub fn h1_matrix(&self) -> &CsrMatrix {
        &self.h1
    }

    /// Projection of a field given by its values and gradients at the quadrature points.
    pub fn project_point_values(&self, space: &MacroSpace, vals: &[(f64, [f64; 2])]) -> Vec<f64> {
        let load = self.quad.load(space, |k, _| vals[k]);
        self.factor.solve(&load)
    }

    pub fn project(&self, space: &MacroSpace, f: impl Fn([f64; 2]) -> (f64, [f64; 2])) -> Vec<f64> {
        let load = self.quad.load(space, |_, qp| f(qp.x));
        self.factor.solve(&load)
    }
}

/// `H^1(Ω)`-orthogonal projections of an exact field at a list of times.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticProjection {
    pub times: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
}

pub fn elliptic_project(
    u_exact: &ExactMacro<'_>,
    space: &MacroSpace,
    quad_level: u8,
    times: &[f64],
) -> Result<EllipticProjection, IndicatorError> {
    if let Some(&t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(IndicatorError::InvalidTime(t));
    }
    let proj = MacroProjector::new(space, quad_level)?;
    Ok(project_with(&proj, u_exact, space, times))
}

pub fn project_with(proj: &MacroProjector, u_exact: &ExactMacro<'_>, space: &MacroSpace, times: &[f64]) -> EllipticProjection {
    let coeffs = times.iter().map(|&t| proj.project(space, |x| u_exact(t, x))).collect();
    EllipticProjection { times: times.to_vec(), coeffs }
}

/// Composite trapezoid rule on an arbitrary grid.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}
