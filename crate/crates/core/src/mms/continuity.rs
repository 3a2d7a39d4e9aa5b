use super::MmsError;
use crate::fem::system::micro_h1_matrix;
use crate::indicators::projection::trapezoid;
use crate::linalg::{BlockMethod, CsrMatrix};
use crate::solver::stepper::two_scale_energy;
use crate::solver::{Discretization, MacroInput, ModelParams, ProblemData, TwoScaleSolver, TwoScaleState};

/// Scalar macro input `(t, x) -> U(t, x)`.
pub type InputField<'a> = dyn Fn(f64, [f64; 2]) -> f64 + 'a;

/// Outcome of two micro solves driven by different frozen macro inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    /// `||v2 - v1||_X^2 + ||w2 - w1||_X^2`.
    pub numerator: f64,
    /// `||U2 - U1||^2_{L^2(S, L^2(Ω))}`.
    pub denominator: f64,
    pub v_gap_sq: f64,
    pub w_gap_sq: f64,
    /// `None` when the inputs coincide.
    pub ratio: Option<f64>,
}

impl ContinuityReport {
    pub fn status(&self) -> &'static str {
        if self.ratio.is_some() {
            "ok"
        } else {
            "identical inputs"
        }
    }
}

/// Solves the micro equations twice, once per frozen macro input, from the same
/// initial micro data and reports the data-to-solution ratio.
pub fn continuity_experiment(
    disc: &Discretization,
    params: ModelParams,
    data: &dyn ProblemData,
    input1: &InputField<'_>,
    input2: &InputField<'_>,
    dt: f64,
    method: BlockMethod,
) -> Result<ContinuityReport, MmsError> {
    let run = |input: &InputField<'_>| -> Result<Vec<TwoScaleState>, MmsError> {
        let frozen = MacroInput::Frozen(Box::new(move |t| disc.space.interpolate(|x| input(t, x))));
        let solver = TwoScaleSolver::with_input(disc, params, data, dt, frozen)?.with_method(method);
        let mut states = Vec::new();
        solver.run(|s| states.push(s.clone()))?;
        Ok(states)
    };
    let s1 = run(input1)?;
    let s2 = run(input2)?;
    Ok(compare_runs(disc, &s1, &s2))
}

fn compare_runs(disc: &Discretization, s1: &[TwoScaleState], s2: &[TwoScaleState]) -> ContinuityReport {
    let a_y: CsrMatrix = micro_h1_matrix(&disc.sys);
    let m = &disc.sys.m_omega;
    let times: Vec<f64> = s1.iter().map(|s| s.t).collect();
    let gap = |x: &[f64], y: &[f64], op: &CsrMatrix| {
        let d: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
        two_scale_energy(m, op, &d)
    };
    let mut v = Vec::new();
    let mut w = Vec::new();
    let mut u = Vec::new();
    for (p, q) in s1.iter().zip(s2) {
        v.push(gap(&q.b, &p.b, &a_y));
        w.push(gap(&q.c, &p.c, &a_y));
        let d: Vec<f64> = q.a.iter().zip(&p.a).map(|(x, y)| x - y).collect();
        u.push(m.bilinear(&d, &d));
    }
    let integrate = |vals: &[f64]| if vals.len() == 1 { vals[0] } else { trapezoid(&times, vals) };
    let (v_gap_sq, w_gap_sq, denominator) = (integrate(&v), integrate(&w), integrate(&u));
    let numerator = v_gap_sq + w_gap_sq;
    let ratio = (denominator > 0.0).then(|| numerator / denominator);
    ContinuityReport { numerator, denominator, v_gap_sq, w_gap_sq, ratio }
}

/// Closed-form numerator for spatially constant inputs differing by `delta`
/// with `eta = 0`, micro data equal, and fast micro diffusion: the fibre mean
/// gap obeys backward Euler for `e' = -alpha s_R (e - delta)`, `e(0) = 0`,
/// so `e_n = delta (1 - (1 + dt alpha s_R)^{-n})`; `|Ω| = |Y| = 1`.
pub fn scalar_exchange_numerator(delta: f64, alpha: f64, s_r: f64, dt: f64, steps: usize) -> f64 {
    let lambda = alpha * s_r;
    let times: Vec<f64> = (0..=steps).map(|n| n as f64 * dt).collect();
    let vals: Vec<f64> = (0..=steps)
        .map(|n| {
            let e = delta * (1.0 - (1.0 + dt * lambda).powi(-(n as i32)));
            e * e
        })
        .collect();
    trapezoid(&times, &vals)
}
