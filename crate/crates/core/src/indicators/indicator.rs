use crate::fem::MacroSpace;
use crate::geometry::DyadicSquare;

use super::projection::{trapezoid, EllipticProjection, ExactMacro, MacroProjector};
use super::IndicatorError;

/// Squared local `H^1` error of `u - R_U` per element at every time node.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalErrors {
    pub times: Vec<f64>,
    /// `per_time[n][e]`.
    pub per_time: Vec<Vec<f64>>,
}

pub fn local_projection_errors(
    u_exact: &ExactMacro<'_>,
    proj: &EllipticProjection,
    space: &MacroSpace,
    projector: &MacroProjector,
) -> LocalErrors {
    let quad = projector.quadrature();
    let per_time = proj
        .times
        .iter()
        .zip(&proj.coeffs)
        .map(|(&t, r)| {
            let fe = quad.evaluate(space, r);
            let mut acc = vec![0.0; space.n_elements()];
            for (qp, (rv, rg)) in quad.points.iter().zip(fe) {
                let (u, g) = u_exact(t, qp.x);
                let (d, d0, d1) = (u - rv, g[0] - rg[0], g[1] - rg[1]);
                acc[qp.element] += qp.weight * (d * d + d0 * d0 + d1 * d1);
            }
            acc
        })
        .collect();
    LocalErrors { times: proj.times.clone(), per_time }
}

/// Indicator values `nu(Q)` on one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorReport {
    pub generation: usize,
    pub squares: Vec<DyadicSquare>,
    pub values: Vec<f64>,
    pub max: f64,
    pub n_dofs: usize,
}

impl IndicatorReport {
    pub fn sum_of_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// `nu(Q) = (int_0^T int_Q |e|^2 + |grad e|^2)^{1/2}` with `e = u - R_U`,
/// trapezoid in time over the projection's time nodes.
pub fn error_indicator(
    u_exact: &ExactMacro<'_>,
    proj: &EllipticProjection,
    space: &MacroSpace,
    projector: &MacroProjector,
    generation: usize,
) -> IndicatorReport {
    let local = local_projection_errors(u_exact, proj, space, projector);
    indicator_from_local(&local, space, generation)
}

pub fn indicator_from_local(local: &LocalErrors, space: &MacroSpace, generation: usize) -> IndicatorReport {
    let n_el = space.n_elements();
    let values: Vec<f64> = (0..n_el)
        .map(|e| {
            let series: Vec<f64> = local.per_time.iter().map(|v| v[e]).collect();
            let integral = if local.times.len() == 1 { series[0] } else { trapezoid(&local.times, &series) };
            integral.max(0.0).sqrt()
        })
        .collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    IndicatorReport { generation, squares: space.elements().to_vec(), values, max, n_dofs: space.n_dofs() }
}

/// Indices of `{Q : values[Q] >= beta max}`.
pub fn mark(values: &[f64], beta: f64) -> Result<Vec<usize>, IndicatorError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(IndicatorError::InvalidBeta(beta));
    }
    if values.is_empty() {
        return Err(IndicatorError::NoSquares);
    }
    if let Some(&v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(IndicatorError::InvalidIndicator(v));
    }
    let max = values.iter().copied().fold(0.0, f64::max);
    let threshold = beta * max;
    Ok((0..values.len()).filter(|&i| values[i] >= threshold).collect())
}
