use crate::linalg::{block_solve, kron_apply, BlockFactors, BlockMethod, BlockOperator, CgOptions, CsrMatrix};

use super::discretization::Discretization;
use super::params::{ModelParams, ReactionLaw};
use super::problem::{Forcing, Loads, ProblemData};
use super::state::TwoScaleState;
use super::SolverError;

/// How the macro unknown is determined.
pub enum MacroInput<'a> {
    /// Solved together with the micro fields.
    Coupled,
    /// Prescribed coefficient vector as a function of time; only the micro
    /// equations are solved.
    Frozen(Box<dyn Fn(f64) -> Vec<f64> + 'a>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub t: f64,
    /// Relative residual of the linear step system.
    pub residual: f64,
    pub cg_iters: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<TwoScaleState>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn dt(&self) -> f64 {
        if self.states.len() < 2 {
            0.0
        } else {
            self.states[1].t - self.states[0].t
        }
    }

    /// CSV `t,residual,cg_iters` body rows.
    pub fn diagnostics_csv_rows(&self) -> String {
        let mut s = String::new();
        for d in &self.diagnostics {
            s.push_str(&format!("{:.16e},{:.16e},{}\n", d.t, d.residual, d.cg_iters));
        }
        s
    }
}

/// Backward-Euler stepper with lagged reaction for the two-scale system.
///
/// The macro equation is divided by `gamma` so the coupled operator is symmetric.
pub struct TwoScaleSolver<'a> {
    disc: &'a Discretization,
    params: ModelParams,
    data: &'a dyn ProblemData,
    forcing: Option<Box<dyn Forcing + 'a>>,
    input: MacroInput<'a>,
    dt: f64,
    op: BlockOperator,
    factors: BlockFactors,
    method: BlockMethod,
    cg: CgOptions,
}

impl<'a> TwoScaleSolver<'a> {
    pub fn new(
        disc: &'a Discretization,
        params: ModelParams,
        data: &'a dyn ProblemData,
        dt: f64,
    ) -> Result<Self, SolverError> {
        Self::with_input(disc, params, data, dt, MacroInput::Coupled)
    }

    pub fn with_input(
        disc: &'a Discretization,
        params: ModelParams,
        data: &'a dyn ProblemData,
        dt: f64,
        input: MacroInput<'a>,
    ) -> Result<Self, SolverError> {
        params.validate().map_err(SolverError::InvalidParams)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SolverError::InvalidDt(dt));
        }
        let op = step_operator(disc, &params, dt, &input);
        let factors = BlockFactors::new(&op)?;
        let forcing = data.forcing(disc);
        Ok(Self {
            disc,
            params,
            data,
            forcing,
            input,
            dt,
            op,
            factors,
            method: BlockMethod::default(),
            cg: CgOptions::with_tol(1e-10),
        })
    }

    pub fn with_method(mut self, method: BlockMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_cg_options(mut self, cg: CgOptions) -> Self {
        self.cg = cg;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn operator(&self) -> &BlockOperator {
        &self.op
    }

    pub fn discretization(&self) -> &Discretization {
        self.disc
    }

    pub fn initial_state(&self) -> TwoScaleState {
        let mut s = self.data.initial_state(self.disc);
        if let MacroInput::Frozen(f) = &self.input {
            s.a = f(0.0);
        }
        s
    }

    /// Forcing loads at `t` (zero when the data carry none).
    pub fn loads(&self, t: f64) -> Loads {
        match &self.forcing {
            Some(f) => f.loads(t),
            None => {
                let (n1, n2) = (self.disc.n_macro(), self.disc.n_micro());
                Loads { f_u: vec![0.0; n1], f_v: vec![0.0; n1 * n2], f_w: vec![0.0; n1 * n2] }
            }
        }
    }

    /// Largest step allowed by the Lipschitz guard at this state.
    pub fn dt_limit(&self, state: &TwoScaleState) -> f64 {
        let l = self.params.eta.lipschitz_on(state.micro_sup());
        if l > 0.0 {
            1.0 / (2.0 * l)
        } else {
            f64::INFINITY
        }
    }

    /// Prescribed macro values at time `t`: boundary data, or the full frozen input.
    pub fn fixed_values(&self, t: f64) -> Vec<f64> {
        match &self.input {
            MacroInput::Frozen(f) => f(t),
            MacroInput::Coupled => {
                let sp = &self.disc.space;
                (0..sp.n_dofs())
                    .map(|i| if sp.boundary_flags()[i] { self.data.dirichlet(t, sp.node(i)) } else { 0.0 })
                    .collect()
            }
        }
    }

    pub fn step(&self, state: &TwoScaleState) -> Result<(TwoScaleState, StepDiagnostics), SolverError> {
        let dt = self.dt;
        let limit = self.dt_limit(state);
        if dt > limit {
            return Err(SolverError::DtGuard { dt, limit });
        }
        let sys = &self.disc.sys;
        let t_new = state.t + dt;
        let loads = self.loads(t_new);
        let reaction = reaction_load(self.disc, &self.params.eta, &state.b, &state.c);

        let inv_g = 1.0 / self.params.gamma;
        let ma = sys.m_omega.matvec(&state.a);
        let mut rhs: Vec<f64> = ma.iter().zip(&loads.f_u).map(|(m, f)| inv_g * (m / dt + f)).collect();
        let mb = kron_apply(&sys.m_omega, &sys.m_y, &state.b);
        rhs.extend(mb.iter().zip(&reaction).zip(&loads.f_v).map(|((m, n), f)| m / dt - n + f));
        let mc = kron_apply(&sys.m_omega, &sys.m_y, &state.c);
        rhs.extend(mc.iter().zip(&reaction).zip(&loads.f_w).map(|((m, n), f)| m / dt - n + f));

        let fixed = self.fixed_values(t_new);
        let sol = block_solve(&self.op, &self.factors, &rhs, &fixed, self.method, self.cg)?;
        let next = TwoScaleState::from_stacked(t_new, &sol.x, self.disc.n_macro());
        if !next.is_finite() {
            return Err(SolverError::NonFinite { t: t_new });
        }
        Ok((next, StepDiagnostics { t: t_new, residual: sol.residual, cg_iters: sol.iterations }))
    }

    /// Runs to `T_final`, calling `observe` on every state including the initial one.
    pub fn run(&self, mut observe: impl FnMut(&TwoScaleState)) -> Result<Vec<StepDiagnostics>, SolverError> {
        let n = steps_for(self.params.t_final, self.dt)?;
        let mut state = self.initial_state();
        observe(&state);
        let mut diags = Vec::with_capacity(n);
        for k in 1..=n {
            let (mut next, d) = self.step(&state)?;
            next.t = k as f64 * self.dt;
            observe(&next);
            diags.push(d);
            state = next;
        }
        Ok(diags)
    }

    /// Full trajectory `t = 0, dt, ..., T_final`.
    pub fn solve(&self) -> Result<Trajectory, SolverError> {
        let mut states = Vec::new();
        let diagnostics = self.run(|s| states.push(s.clone()))?;
        Ok(Trajectory { states, diagnostics })
    }

    /// Galerkin residuals `(R_a, R_b, R_c)` of the semi-discrete system for a
    /// state and a candidate time derivative.
    pub fn semidiscrete_residual(
        &self,
        state: &TwoScaleState,
        rate: &TwoScaleState,
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), SolverError> {
        semidiscrete_residual(self.disc, &self.params, state, rate, &self.loads(state.t))
    }
}

/// Number of steps of size `dt` covering `[0, t_final]`.
pub fn steps_for(t_final: f64, dt: f64) -> Result<usize, SolverError> {
    let n = (t_final / dt).round();
    if n < 1.0 || (n * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(SolverError::IncommensurateDt { dt, t_final });
    }
    Ok(n as usize)
}

/// Default step: the largest `T / n` not exceeding `h`.
pub fn default_dt(t_final: f64, h: f64) -> f64 {
    t_final / (t_final / h).ceil().max(1.0)
}

fn step_operator(disc: &Discretization, p: &ModelParams, dt: f64, input: &MacroInput<'_>) -> BlockOperator {
    let sys = &disc.sys;
    let inv_g = 1.0 / p.gamma;
    let a_block = sys
        .m_omega
        .linear_combination(inv_g / dt + p.alpha * sys.s_r, &sys.k_omega, inv_g * p.d_u);
    let micro_v = sys
        .m_y
        .linear_combination(1.0 / dt, &sys.k_y, p.d_v)
        .linear_combination(1.0, &sys.b_y, p.alpha);
    let micro_w = sys.m_y.linear_combination(1.0 / dt, &sys.k_y, p.d_w);
    let fixed = match input {
        MacroInput::Coupled => disc.space.boundary_flags().to_vec(),
        MacroInput::Frozen(_) => vec![true; disc.n_macro()],
    };
    BlockOperator {
        m_omega: sys.m_omega.clone(),
        a_block,
        alpha: p.alpha,
        t_y: sys.t_y.clone(),
        micro_v,
        micro_w,
        fixed,
    }
}

/// Galerkin residuals of the semi-discrete equations.
pub fn semidiscrete_residual(
    disc: &Discretization,
    p: &ModelParams,
    state: &TwoScaleState,
    rate: &TwoScaleState,
    loads: &Loads,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), SolverError> {
    let sys = &disc.sys;
    let (n1, n2) = (disc.n_macro(), disc.n_micro());
    for (v, n) in [(&state.a, n1), (&rate.a, n1), (&state.b, n1 * n2), (&rate.b, n1 * n2), (&state.c, n1 * n2), (&rate.c, n1 * n2)] {
        if v.len() != n {
            return Err(SolverError::DimensionMismatch { expected: n, found: v.len() });
        }
    }
    let ma = sys.m_omega.matvec(&state.a);
    let mt_b = sys.m_omega.matvec(&crate::linalg::contract_micro(&state.b, &sys.t_y));
    let m_adot = sys.m_omega.matvec(&rate.a);
    let ka = sys.k_omega.matvec(&state.a);
    let ga = p.gamma * p.alpha;
    let r_a: Vec<f64> = (0..n1)
        .map(|i| m_adot[i] + p.d_u * ka[i] - ga * (mt_b[i] - sys.s_r * ma[i]) - loads.f_u[i])
        .collect();

    let reaction = reaction_load(disc, &p.eta, &state.b, &state.c);
    let mm_bdot = kron_apply(&sys.m_omega, &sys.m_y, &rate.b);
    let mk_b = kron_apply(&sys.m_omega, &sys.k_y, &state.b);
    let mb_b = kron_apply(&sys.m_omega, &sys.b_y, &state.b);
    let mut r_b = vec![0.0; n1 * n2];
    for i in 0..n1 {
        for j in 0..n2 {
            let k = i * n2 + j;
            r_b[k] = mm_bdot[k] + p.d_v * mk_b[k] + p.alpha * (mb_b[k] - ma[i] * sys.t_y[j]) + reaction[k] - loads.f_v[k];
        }
    }
    let mm_cdot = kron_apply(&sys.m_omega, &sys.m_y, &rate.c);
    let mk_c = kron_apply(&sys.m_omega, &sys.k_y, &state.c);
    let r_c = (0..n1 * n2).map(|k| mm_cdot[k] + p.d_w * mk_c[k] + reaction[k] - loads.f_w[k]).collect();
    Ok((r_a, r_b, r_c))
}

/// Load vector of `int eta(v, w) phi_i psi_j` over `Ω x Y`.
pub fn reaction_load(disc: &Discretization, eta: &ReactionLaw, b: &[f64], c: &[f64]) -> Vec<f64> {
    let sys = &disc.sys;
    match *eta {
        ReactionLaw::Zero => vec![0.0; b.len()],
        ReactionLaw::Linear { k } => {
            let s: Vec<f64> = b.iter().zip(c).map(|(x, y)| k * (x + y)).collect();
            kron_apply(&sys.m_omega, &sys.m_y, &s)
        }
        ReactionLaw::TruncatedBilinear { .. } => quadrature_reaction(disc, eta, b, c),
    }
}

fn quadrature_reaction(disc: &Discretization, eta: &ReactionLaw, b: &[f64], c: &[f64]) -> Vec<f64> {
    let n2 = disc.n_micro();
    let mut out = vec![0.0; b.len()];
    let mut vb = vec![0.0; n2];
    let mut wc = vec![0.0; n2];
    let mut load = vec![0.0; n2];
    for qp in &disc.macro_quad.points {
        vb.iter_mut().for_each(|x| *x = 0.0);
        wc.iter_mut().for_each(|x| *x = 0.0);
        let dofs = disc.space.element_dofs(qp.element);
        for (k, row) in dofs.iter().enumerate() {
            for &(d, w) in row {
                let s = qp.shape[k] * w;
                if s == 0.0 {
                    continue;
                }
                for j in 0..n2 {
                    vb[j] += s * b[d * n2 + j];
                    wc[j] += s * c[d * n2 + j];
                }
            }
        }
        load.iter_mut().for_each(|x| *x = 0.0);
        for mp in &disc.micro_quad.points {
            let mut v = 0.0;
            let mut w = 0.0;
            for k in 0..4 {
                v += mp.shape[k] * vb[mp.nodes[k]];
                w += mp.shape[k] * wc[mp.nodes[k]];
            }
            let e = eta.eval(v, w) * mp.weight;
            for k in 0..4 {
                load[mp.nodes[k]] += e * mp.shape[k];
            }
        }
        for (k, row) in dofs.iter().enumerate() {
            for &(d, w) in row {
                let s = qp.weight * qp.shape[k] * w;
                if s == 0.0 {
                    continue;
                }
                for j in 0..n2 {
                    out[d * n2 + j] += s * load[j];
                }
            }
        }
    }
    out
}

/// `(M_Ω ⊗ M_Y)`-weighted integral of a tensor coefficient vector.
pub fn two_scale_integral(sys: &crate::fem::FeSystem, b: &[f64]) -> f64 {
    let wx = sys.m_omega.row_sums();
    let wy = sys.m_y.row_sums();
    let n2 = wy.len();
    b.chunks_exact(n2).zip(&wx).map(|(blk, wi)| wi * blk.iter().zip(&wy).map(|(x, y)| x * y).sum::<f64>()).sum()
}

/// Discrete `L^2(Ω x Y)` norm squared of a tensor coefficient vector with operator `B`
/// on the micro factor: `x^T (M_Ω ⊗ B) x`.
pub fn two_scale_energy(m_omega: &CsrMatrix, micro: &CsrMatrix, x: &[f64]) -> f64 {
    crate::linalg::dot(x, &kron_apply(m_omega, micro, x))
}
