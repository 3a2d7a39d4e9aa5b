use crate::linalg::{contract_micro, dot};

use super::discretization::Discretization;
use super::params::ModelParams;
use super::problem::Loads;
use super::state::TwoScaleState;
use super::stepper::{semidiscrete_residual, two_scale_energy, two_scale_integral, Trajectory};
use super::SolverError;

/// Time-derivative and energy quantities of a discrete trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TimeDerivativeReport {
    /// Difference-quotient norms squared over `S`, per field.
    pub dt_u: f64,
    pub dt_v: f64,
    pub dt_w: f64,
    /// Gradient energies integrated over `S` (trapezoid).
    pub grad_l2: f64,
    /// Largest gradient energy over the time grid.
    pub grad_sup: f64,
    /// `||U||^2 + ||v||^2 + ||w||^2` integrated over `S`.
    pub mass_l2: f64,
    /// Energy of the initial state, gradient terms plus the interface term.
    pub c_initial: f64,
    /// Left side: time-derivative norms plus integrated gradient energies.
    pub lhs: f64,
    /// `constant * (c_initial + mass_l2)`.
    pub rhs: f64,
    pub ratio: f64,
}

impl TimeDerivativeReport {
    pub fn time_derivative_norm(&self) -> f64 {
        self.dt_u + self.dt_v + self.dt_w
    }
}

/// Streaming accumulator for [`TimeDerivativeReport`].
pub struct TimeDerivativeAccumulator<'a> {
    disc: &'a Discretization,
    constant: f64,
    prev: Option<(TwoScaleState, f64, f64)>,
    count: usize,
    report: TimeDerivativeReport,
}

impl<'a> TimeDerivativeAccumulator<'a> {
    pub fn new(disc: &'a Discretization, constant: f64) -> Self {
        Self { disc, constant, prev: None, count: 0, report: TimeDerivativeReport::default() }
    }

    fn energies(&self, s: &TwoScaleState) -> (f64, f64, f64) {
        let sys = &self.disc.sys;
        let grad = sys.k_omega.bilinear(&s.a, &s.a)
            + two_scale_energy(&sys.m_omega, &sys.k_y, &s.b)
            + two_scale_energy(&sys.m_omega, &sys.k_y, &s.c);
        let mass = sys.m_omega.bilinear(&s.a, &s.a)
            + two_scale_energy(&sys.m_omega, &sys.m_y, &s.b)
            + two_scale_energy(&sys.m_omega, &sys.m_y, &s.c);
        let ma = sys.m_omega.matvec(&s.a);
        let theta = two_scale_energy(&sys.m_omega, &sys.b_y, &s.b) - 2.0 * dot(&ma, &contract_micro(&s.b, &sys.t_y));
        (grad, mass, theta)
    }

    pub fn push(&mut self, s: &TwoScaleState) {
        let (grad, mass, theta) = self.energies(s);
        let r = &mut self.report;
        if self.count == 0 {
            r.c_initial = grad + theta;
        }
        self.count += 1;
        r.grad_sup = r.grad_sup.max(grad);
        if let Some((p, pg, pm)) = &self.prev {
            let dt = s.t - p.t;
            let sys = &self.disc.sys;
            let da: Vec<f64> = s.a.iter().zip(&p.a).map(|(x, y)| (x - y) / dt).collect();
            let db: Vec<f64> = s.b.iter().zip(&p.b).map(|(x, y)| (x - y) / dt).collect();
            let dc: Vec<f64> = s.c.iter().zip(&p.c).map(|(x, y)| (x - y) / dt).collect();
            r.dt_u += dt * sys.m_omega.bilinear(&da, &da);
            r.dt_v += dt * two_scale_energy(&sys.m_omega, &sys.m_y, &db);
            r.dt_w += dt * two_scale_energy(&sys.m_omega, &sys.m_y, &dc);
            r.grad_l2 += 0.5 * dt * (pg + grad);
            r.mass_l2 += 0.5 * dt * (pm + mass);
        }
        self.prev = Some((s.clone(), grad, mass));
    }

    pub fn finish(self) -> Result<TimeDerivativeReport, SolverError> {
        let mut r = self.report;
        if self.count < 2 {
            return Err(SolverError::TooFewStates { needed: 2, found: self.count });
        }
        r.lhs = r.time_derivative_norm() + r.grad_l2;
        r.rhs = self.constant * (r.c_initial + r.mass_l2);
        r.ratio = if r.rhs != 0.0 { r.lhs / r.rhs } else if r.lhs == 0.0 { 0.0 } else { f64::INFINITY };
        Ok(r)
    }
}

/// Diagnostic of a stored trajectory.
pub fn time_derivative_diagnostic(
    disc: &Discretization,
    traj: &Trajectory,
    constant: f64,
) -> Result<TimeDerivativeReport, SolverError> {
    if traj.states.len() < 2 {
        return Err(SolverError::TooFewStates { needed: 2, found: traj.states.len() });
    }
    let mut acc = TimeDerivativeAccumulator::new(disc, constant);
    for s in &traj.states {
        acc.push(s);
    }
    acc.finish()
}

/// Both sides of the discrete mass identity over one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassBalance {
    /// Change of `int U + gamma int v` divided by `dt`.
    pub storage_rate: f64,
    /// Net boundary flux (the Dirichlet reactions) plus volume sources.
    pub flux: f64,
}

impl MassBalance {
    pub fn defect(&self) -> f64 {
        (self.storage_rate - self.flux).abs()
    }
}

/// Total mass `int U + gamma int v`.
pub fn total_mass(disc: &Discretization, gamma: f64, s: &TwoScaleState) -> f64 {
    let ones = vec![1.0; disc.n_macro()];
    disc.sys.m_omega.bilinear(&ones, &s.a) + gamma * two_scale_integral(&disc.sys, &s.b)
}

/// Mass bookkeeping across a backward-Euler step `prev -> next` with loads at `next.t`.
pub fn mass_balance(
    disc: &Discretization,
    p: &ModelParams,
    prev: &TwoScaleState,
    next: &TwoScaleState,
    loads: &Loads,
) -> Result<MassBalance, SolverError> {
    let dt = next.t - prev.t;
    let storage_rate = (total_mass(disc, p.gamma, next) - total_mass(disc, p.gamma, prev)) / dt;
    let rate = TwoScaleState {
        t: next.t,
        a: next.a.iter().zip(&prev.a).map(|(x, y)| (x - y) / dt).collect(),
        b: next.b.iter().zip(&prev.b).map(|(x, y)| (x - y) / dt).collect(),
        c: next.c.iter().zip(&prev.c).map(|(x, y)| (x - y) / dt).collect(),
    };
    let (r_a, _, _) = semidiscrete_residual(disc, p, next, &rate, loads)?;
    let boundary: f64 = r_a.iter().zip(disc.space.boundary_flags()).filter(|(_, b)| **b).map(|(r, _)| r).sum();
    let sources = loads.f_u.iter().sum::<f64>() + p.gamma * loads.f_v.iter().sum::<f64>();
    Ok(MassBalance { storage_rate, flux: boundary + sources })
}
