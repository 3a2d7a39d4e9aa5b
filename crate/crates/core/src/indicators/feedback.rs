use crate::geometry::{DyadicSquare, MacroPartition, MicroMesh, Side};
use crate::linalg::BlockMethod;
use crate::mms::{error_norms_with, ErrorNorms, ManufacturedProblem};
use crate::solver::{steps_for, Discretization, TwoScaleSolver};

use super::indicator::{indicator_from_local, local_projection_errors, mark, IndicatorReport};
use super::projection::{project_with, MacroProjector};
use super::IndicatorError;

#[derive(Debug, Clone)]
pub struct FeedbackOptions {
    pub beta: f64,
    pub iters: usize,
    /// Stop once `max nu` falls below this.
    pub tol: f64,
    pub micro_n: usize,
    pub gamma_r: Vec<Side>,
    pub initial: MacroPartition,
    /// Fixed step; `None` picks the problem's default for each partition.
    pub dt: Option<f64>,
    pub method: BlockMethod,
    /// Solve the two-scale system on every partition and record error norms.
    pub solve: bool,
}

impl Default for FeedbackOptions {
    fn default() -> Self {
        Self {
            beta: 0.5,
            iters: 12,
            tol: 1e-6,
            micro_n: 4,
            gamma_r: vec![Side::Top],
            initial: MacroPartition::unit(),
            dt: None,
            method: BlockMethod::Direct,
            solve: true,
        }
    }
}

/// One generation of the loop.
#[derive(Debug, Clone)]
pub struct FeedbackStep {
    pub iter: usize,
    pub partition: MacroPartition,
    pub report: IndicatorReport,
    pub dt: f64,
    /// Squares split because they were marked; empty when the loop stopped here.
    pub marked: Vec<DyadicSquare>,
    /// Squares split to restore 1-irregularity.
    pub closure: Vec<DyadicSquare>,
    pub norms: Option<ErrorNorms>,
}

impl FeedbackStep {
    /// `||U - R_U||` in `L^2(S, H^1(Ω))`.
    pub fn e2_norm(&self) -> f64 {
        self.report.sum_of_squares().sqrt()
    }
}

#[derive(Debug, Clone, Default)]
pub struct FeedbackHistory {
    pub steps: Vec<FeedbackStep>,
}

impl FeedbackHistory {
    pub const CSV_HEADER: &'static str = "iter,n_squares,n_dofs,max_nu,sum_nu_sq,e2_norm,marked,closure_splits";

    /// Body rows matching [`Self::CSV_HEADER`].
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for st in &self.steps {
            s.push_str(&format!(
                "{},{},{},{:.16e},{:.16e},{:.16e},{},{}\n",
                st.iter,
                st.partition.len(),
                st.report.n_dofs,
                st.report.max,
                st.report.sum_of_squares(),
                st.e2_norm(),
                st.marked.len(),
                st.closure.len()
            ));
        }
        s
    }
}

/// Indicator of the elliptic projection error of the exact macro field on
/// `partition` at the time nodes `times`.
pub fn projection_report(
    problem: &ManufacturedProblem,
    partition: &MacroPartition,
    times: &[f64],
    generation: usize,
) -> Result<IndicatorReport, IndicatorError> {
    let space = crate::fem::MacroSpace::new(partition)?;
    let projector = MacroProjector::new(&space, problem.quadrature_level(partition.max_level()))?;
    let exact = |t: f64, x: [f64; 2]| problem.exact_u(t, x);
    let proj = project_with(&projector, &exact, &space, times);
    let local = local_projection_errors(&exact, &proj, &space, &projector);
    Ok(indicator_from_local(&local, &space, generation))
}

/// Solve, project, indicate, mark, refine; repeated `iters` times or until
/// `max nu < tol`.
pub fn feedback_loop(problem: &ManufacturedProblem, opts: &FeedbackOptions) -> Result<FeedbackHistory, IndicatorError> {
    if opts.iters == 0 {
        return Err(IndicatorError::NoIterations);
    }
    if !(opts.beta > 0.0 && opts.beta < 1.0) {
        return Err(IndicatorError::InvalidBeta(opts.beta));
    }
    let mesh = MicroMesh::new(opts.micro_n, &opts.gamma_r)?;
    let mut partition = opts.initial.clone();
    let mut history = FeedbackHistory::default();
    for iter in 0..opts.iters {
        let disc = Discretization::new(&partition, &mesh)?;
        let dt = opts.dt.unwrap_or_else(|| problem.default_dt(disc.h_omega()));
        let steps = steps_for(problem.params.t_final, dt)?;
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
        let projector =
            MacroProjector::from_system(&disc.space, &disc.sys, problem.quadrature_level(partition.max_level()))?;
        let exact = |t: f64, x: [f64; 2]| problem.exact_u(t, x);
        let proj = project_with(&projector, &exact, &disc.space, &times);

        let norms = if opts.solve {
            let solver = TwoScaleSolver::new(&disc, problem.params, problem, dt)?.with_method(opts.method);
            let traj = solver.solve()?;
            Some(
                error_norms_with(problem, &disc, &traj.states, &projector, &proj)
                    .map_err(|e| IndicatorError::Mms(e.to_string()))?,
            )
        } else {
            None
        };
        let report = match &norms {
            Some(n) => indicator_from_local(&n.local, &disc.space, iter),
            None => indicator_from_local(&local_projection_errors(&exact, &proj, &disc.space, &projector), &disc.space, iter),
        };

        let stop = report.max < opts.tol;
        let (marked, closure, next) = if stop {
            (Vec::new(), Vec::new(), None)
        } else {
            let idx = mark(&report.values, opts.beta)?;
            let chosen: Vec<DyadicSquare> = idx.iter().map(|&i| report.squares[i]).collect();
            let out = partition.refine(&chosen)?;
            (out.marked, out.closure, Some(out.partition))
        };
        history.steps.push(FeedbackStep { iter, partition: partition.clone(), report, dt, marked, closure, norms });
        match next {
            Some(p) => partition = p,
            None => break,
        }
    }
    Ok(history)
}
