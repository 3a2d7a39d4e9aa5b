use super::fields::TwoScaleField;
use super::problem::ManufacturedProblem;
use super::MmsError;
use crate::fem::system::micro_h1_matrix;
use crate::indicators::projection::{trapezoid, MacroProjector};
use crate::indicators::{local_projection_errors, EllipticProjection, LocalErrors};
use crate::linalg::{dot, CsrMatrix, EnvelopeCholesky};
use crate::solver::stepper::two_scale_energy;
use crate::solver::{Discretization, Trajectory, TwoScaleState};

/// Bochner-norm errors of a discrete trajectory against a manufactured solution.
/// All fields are squared norms integrated in time by the trapezoid rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorNorms {
    /// `||e_U||^2` in `L^2(S, L^2(Ω))`.
    pub u_l2_sq: f64,
    /// `||e_U||^2` in `L^2(S, H^1(Ω))`.
    pub u_h1_sq: f64,
    /// `||R_U - U_h||^2` in `L^2(S, H^1(Ω))`.
    pub e1_h1_sq: f64,
    /// `||U - R_U||^2` in `L^2(S, H^1(Ω))`.
    pub e2_h1_sq: f64,
    /// `||U - R_U||^2` in `L^2(S, L^2(Ω))`.
    pub e2_l2_sq: f64,
    /// `||e1_U(0)||_{L^2(Ω)}`.
    pub e1_initial_l2: f64,
    /// `||e_v||^2` and `||e_w||^2` in `L^2(S, L^2(Ω, H^1(Y)))`.
    pub v_x_sq: f64,
    pub w_x_sq: f64,
    /// Parts of `v_x_sq`, `w_x_sq` due to the fibrewise micro projection error.
    pub v_proj_sq: f64,
    pub w_proj_sq: f64,
    /// Largest `| ||e||^2 - ||e1||^2 - ||e2||^2 |` over time nodes, relative to `||e||^2`.
    pub pythagoras_defect: f64,
    /// Local projection errors per element and time node.
    pub local: LocalErrors,
}

impl ErrorNorms {
    pub fn u_l2(&self) -> f64 {
        self.u_l2_sq.max(0.0).sqrt()
    }

    pub fn u_h1(&self) -> f64 {
        self.u_h1_sq.max(0.0).sqrt()
    }

    pub fn e2_h1(&self) -> f64 {
        self.e2_h1_sq.max(0.0).sqrt()
    }

    pub fn v_x(&self) -> f64 {
        self.v_x_sq.max(0.0).sqrt()
    }

    pub fn w_x(&self) -> f64 {
        self.w_x_sq.max(0.0).sqrt()
    }

    /// `max(||e2||, ||e2||^2)` in `L^2(S, H^1(Ω))`.
    pub fn eps_u(&self) -> f64 {
        let e = self.e2_h1();
        e.max(e * e)
    }

    /// `||e_U||_{L^2(S,H^1)} / (sqrt(eps_U) + ||e1_U(0)||)`, `None` at the floor.
    pub fn macro_control_ratio(&self) -> Option<f64> {
        let den = self.eps_u().sqrt() + self.e1_initial_l2;
        (self.u_h1() > MACRO_FLOOR && den > 0.0).then(|| self.u_h1() / den)
    }
}

/// Macro errors below this are treated as zero in ratios.
pub const MACRO_FLOOR: f64 = 1e-14;

/// Fibrewise `H^1(Y)` projector `Π` on the micro space.
#[derive(Debug, Clone)]
pub struct MicroProjector {
    h1: CsrMatrix,
    factor: EnvelopeCholesky,
}

impl MicroProjector {
    pub fn new(disc: &Discretization) -> Result<Self, MmsError> {
        let h1 = micro_h1_matrix(&disc.sys);
        let factor = EnvelopeCholesky::factor(&h1)?;
        Ok(Self { h1, factor })
    }

    pub fn h1_matrix(&self) -> &CsrMatrix {
        &self.h1
    }
}

/// Precomputed projection data of one separable two-scale field
/// `sum_r c_r(t) X_r(x) Q_r(y)`. The macro factors are split as
/// `X_r = I X_r + d_r` with `I` nodal interpolation.
struct FieldData {
    times: Vec<super::fields::Poly>,
    /// Nodal values of `X_r`.
    interp: Vec<Vec<f64>>,
    /// `int d_r phi_i`.
    defect_loads: Vec<Vec<f64>>,
    /// `int d_r d_s`.
    dd: Vec<Vec<f64>>,
    /// `q_r = Π Q_r` and `A q_r`.
    q: Vec<Vec<f64>>,
    a_q: Vec<Vec<f64>>,
    /// `int_Ω X_r X_s`.
    mxx: Vec<Vec<f64>>,
    /// `(Q_r - q_r, Q_s - q_s)` in `L^2(Y)` and `H^1(Y)`.
    gram_l2: Vec<Vec<f64>>,
    gram_h1: Vec<Vec<f64>>,
    /// `q_r^T A q_s`.
    qaq: Vec<Vec<f64>>,
}

impl FieldData {
    fn new(
        field: &TwoScaleField,
        disc: &Discretization,
        macro_proj: &MacroProjector,
        micro_proj: &MicroProjector,
    ) -> Self {
        let space = &disc.space;
        let quad = macro_proj.quadrature();
        let micro = &disc.micro;
        let mq = micro.quadrature(4);
        let n2 = micro.n_dofs();
        let r_count = field.terms.len();

        let interp: Vec<Vec<f64>> = field.terms.iter().map(|r| space.interpolate(|x| r.x.value(x))).collect();
        let interp_vals: Vec<Vec<(f64, [f64; 2])>> = interp.iter().map(|c| quad.evaluate(space, c)).collect();
        let defect_loads = field
            .terms
            .iter()
            .zip(&interp_vals)
            .map(|(r, iv)| quad.load(space, |k, qp| (r.x.value(qp.x) - iv[k].0, [0.0; 2])))
            .collect();
        let mut mxx = vec![vec![0.0; r_count]; r_count];
        let mut dd = vec![vec![0.0; r_count]; r_count];
        for (k, qp) in quad.points.iter().enumerate() {
            let vals: Vec<f64> = field.terms.iter().map(|r| r.x.value(qp.x)).collect();
            let defects: Vec<f64> = (0..r_count).map(|r| vals[r] - interp_vals[r][k].0).collect();
            for r in 0..r_count {
                for s in 0..r_count {
                    mxx[r][s] += qp.weight * vals[r] * vals[s];
                    dd[r][s] += qp.weight * defects[r] * defects[s];
                }
            }
        }

        let q: Vec<Vec<f64>> = field
            .terms
            .iter()
            .map(|r| micro_proj.factor.solve(&mq.load(n2, |p| (r.y.value(p.y), r.y.grad(p.y)))))
            .collect();
        let a_q: Vec<Vec<f64>> = q.iter().map(|qr| micro_proj.h1.matvec(qr)).collect();
        let qaq = (0..r_count).map(|r| (0..r_count).map(|s| dot(&q[r], &a_q[s])).collect()).collect();

        let mut gram_l2 = vec![vec![0.0; r_count]; r_count];
        let mut gram_h1 = vec![vec![0.0; r_count]; r_count];
        for p in &mq.points {
            let res: Vec<(f64, [f64; 2])> = field
                .terms
                .iter()
                .zip(&q)
                .map(|(r, qr)| {
                    let mut v = r.y.value(p.y);
                    let mut g = r.y.grad(p.y);
                    for k in 0..4 {
                        let c = qr[p.nodes[k]];
                        v -= c * p.shape[k];
                        g[0] -= c * p.grad[k][0];
                        g[1] -= c * p.grad[k][1];
                    }
                    (v, g)
                })
                .collect();
            for r in 0..r_count {
                for s in 0..r_count {
                    let l2 = res[r].0 * res[s].0;
                    gram_l2[r][s] += p.weight * l2;
                    gram_h1[r][s] += p.weight * (l2 + res[r].1[0] * res[s].1[0] + res[r].1[1] * res[s].1[1]);
                }
            }
        }
        Self {
            times: field.terms.iter().map(|r| r.time.clone()).collect(),
            interp,
            defect_loads,
            dd,
            q,
            a_q,
            mxx,
            gram_l2,
            gram_h1,
            qaq,
        }
    }

    fn coefficients(&self, t: f64) -> Vec<f64> {
        self.times.iter().map(|p| p.eval(t)).collect()
    }

    fn quadratic(&self, c: &[f64], g: &[Vec<f64>]) -> f64 {
        self.weighted(c, &self.mxx, g)
    }

    fn weighted(&self, c: &[f64], w: &[Vec<f64>], g: &[Vec<f64>]) -> f64 {
        let mut s = 0.0;
        for r in 0..c.len() {
            for q in 0..c.len() {
                s += c[r] * c[q] * w[r][q] * g[r][q];
            }
        }
        s
    }

    /// `(projection part, discrete part)` of `||chi(t) - chi_h||^2_{L^2(Ω,H^1(Y))}`.
    fn error_at(&self, t: f64, coeffs: &[f64], m_omega: &CsrMatrix, a_y: &CsrMatrix) -> (f64, f64) {
        let c = self.coefficients(t);
        let proj = self.quadratic(&c, &self.gram_h1);
        let n2 = a_y.rows();
        let mut d: Vec<f64> = coeffs.iter().map(|b| -b).collect();
        for (r, cr) in c.iter().enumerate() {
            for (i, xi) in self.interp[r].iter().enumerate() {
                let s = cr * xi;
                for (o, qj) in d[i * n2..(i + 1) * n2].iter_mut().zip(&self.q[r]) {
                    *o += s * qj;
                }
            }
        }
        let mut cross = 0.0;
        for (r, cr) in c.iter().enumerate() {
            for (i, li) in self.defect_loads[r].iter().enumerate() {
                if *li != 0.0 {
                    cross += cr * li * dot(&self.a_q[r], &d[i * n2..(i + 1) * n2]);
                }
            }
        }
        let disc = two_scale_energy(m_omega, a_y, &d) + 2.0 * cross + self.weighted(&c, &self.dd, &self.qaq);
        (proj, disc)
    }
}

/// All error norms of `traj` against the exact solution of `problem`.
pub fn error_norms(problem: &ManufacturedProblem, disc: &Discretization, traj: &Trajectory) -> Result<ErrorNorms, MmsError> {
    let level = problem.quadrature_level(disc.space.partition().max_level());
    let projector = MacroProjector::from_system(&disc.space, &disc.sys, level)?;
    let times: Vec<f64> = traj.states.iter().map(|s| s.t).collect();
    let exact = |t: f64, x: [f64; 2]| problem.exact_u(t, x);
    let proj = crate::indicators::projection::project_with(&projector, &exact, &disc.space, &times);
    error_norms_with(problem, disc, &traj.states, &projector, &proj)
}

/// `||U - R_U||^2` in `L^2(S, L^2(Ω))` and `L^2(S, H^1(Ω))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroProjectionErrors {
    pub l2_sq: f64,
    pub h1_sq: f64,
}

/// Elliptic projection errors of the exact macro field at `times`.
pub fn macro_projection_errors(
    problem: &ManufacturedProblem,
    disc: &Discretization,
    times: &[f64],
) -> Result<MacroProjectionErrors, MmsError> {
    if times.is_empty() {
        return Err(MmsError::EmptyTrajectory);
    }
    let level = problem.quadrature_level(disc.space.partition().max_level());
    let projector = MacroProjector::from_system(&disc.space, &disc.sys, level)?;
    let exact = |t: f64, x: [f64; 2]| problem.exact_u(t, x);
    let proj = crate::indicators::projection::project_with(&projector, &exact, &disc.space, times);
    let quad = projector.quadrature();
    let mut l2 = Vec::with_capacity(times.len());
    let mut h1 = Vec::with_capacity(times.len());
    for (&t, r) in times.iter().zip(&proj.coeffs) {
        let (mut a, mut b) = (0.0, 0.0);
        for (qp, (rv, rg)) in quad.points.iter().zip(quad.evaluate(&disc.space, r)) {
            let (u, g) = problem.exact_u(t, qp.x);
            let (d, d0, d1) = (u - rv, g[0] - rg[0], g[1] - rg[1]);
            a += qp.weight * d * d;
            b += qp.weight * (d * d + d0 * d0 + d1 * d1);
        }
        l2.push(a);
        h1.push(b);
    }
    let integrate = |v: &[f64]| if times.len() == 1 { v[0] } else { trapezoid(times, v) };
    Ok(MacroProjectionErrors { l2_sq: integrate(&l2), h1_sq: integrate(&h1) })
}

/// As [`error_norms`] with a precomputed macro projector and elliptic projection
/// at the state times.
pub fn error_norms_with(
    problem: &ManufacturedProblem,
    disc: &Discretization,
    states: &[TwoScaleState],
    projector: &MacroProjector,
    proj: &EllipticProjection,
) -> Result<ErrorNorms, MmsError> {
    if states.is_empty() {
        return Err(MmsError::EmptyTrajectory);
    }
    if proj.times.len() != states.len() {
        return Err(MmsError::DimensionMismatch { expected: states.len(), found: proj.times.len() });
    }
    let space = &disc.space;
    let quad = projector.quadrature();
    let micro_proj = MicroProjector::new(disc)?;
    let a_y = micro_proj.h1_matrix().clone();
    let vdata = FieldData::new(&problem.v, disc, projector, &micro_proj);
    let wdata = FieldData::new(&problem.w, disc, projector, &micro_proj);

    let n = states.len();
    let mut series = vec![vec![0.0; n]; 9];
    let mut pythagoras_defect: f64 = 0.0;
    for (k, (s, r)) in states.iter().zip(&proj.coeffs).enumerate() {
        let t = s.t;
        let uh = quad.evaluate(space, &s.a);
        let (mut e_l2, mut e_h1, mut e2_l2, mut e2_h1) = (0.0, 0.0, 0.0, 0.0);
        let rh = quad.evaluate(space, r);
        for ((qp, (hv, hg)), (rv, rg)) in quad.points.iter().zip(&uh).zip(&rh) {
            let (u, g) = problem.exact_u(t, qp.x);
            let (d, d0, d1) = (u - hv, g[0] - hg[0], g[1] - hg[1]);
            e_l2 += qp.weight * d * d;
            e_h1 += qp.weight * (d * d + d0 * d0 + d1 * d1);
            let (d, d0, d1) = (u - rv, g[0] - rg[0], g[1] - rg[1]);
            e2_l2 += qp.weight * d * d;
            e2_h1 += qp.weight * (d * d + d0 * d0 + d1 * d1);
        }
        let diff: Vec<f64> = r.iter().zip(&s.a).map(|(x, y)| x - y).collect();
        let e1_h1 = projector.h1_matrix().bilinear(&diff, &diff);
        if e_h1 > 0.0 {
            pythagoras_defect = pythagoras_defect.max((e_h1 - e1_h1 - e2_h1).abs() / e_h1);
        }
        let (vp, vd) = vdata.error_at(t, &s.b, &disc.sys.m_omega, &a_y);
        let (wp, wd) = wdata.error_at(t, &s.c, &disc.sys.m_omega, &a_y);
        for (slot, val) in series.iter_mut().zip([e_l2, e_h1, e1_h1, e2_h1, e2_l2, vp + vd, wp + wd, vp, wp]) {
            slot[k] = val;
        }
    }
    let times = &proj.times;
    let integrate = |v: &[f64]| if n == 1 { v[0] } else { trapezoid(times, v) };
    let d0: Vec<f64> = proj.coeffs[0].iter().zip(&states[0].a).map(|(x, y)| x - y).collect();
    let e1_initial_l2 = disc.sys.m_omega.bilinear(&d0, &d0).max(0.0).sqrt();
    let exact = |t: f64, x: [f64; 2]| problem.exact_u(t, x);
    let local = local_projection_errors(&exact, proj, space, projector);
    Ok(ErrorNorms {
        u_l2_sq: integrate(&series[0]),
        u_h1_sq: integrate(&series[1]),
        e1_h1_sq: integrate(&series[2]),
        e2_h1_sq: integrate(&series[3]),
        e2_l2_sq: integrate(&series[4]),
        e1_initial_l2,
        v_x_sq: integrate(&series[5]),
        w_x_sq: integrate(&series[6]),
        v_proj_sq: integrate(&series[7]),
        w_proj_sq: integrate(&series[8]),
        pythagoras_defect,
        local,
    })
}

/// `||chi - R_chi||^2` of the exact micro fields in `L^2(S, L^2(Ω, L^2(Y)))` and
/// `L^2(S, L^2(Ω, H^1(Y)))`, with `R_chi` the fibrewise micro projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroProjectionErrors {
    pub v_l2_sq: f64,
    pub v_h1_sq: f64,
    pub w_l2_sq: f64,
    pub w_h1_sq: f64,
}

pub fn micro_projection_errors(
    problem: &ManufacturedProblem,
    disc: &Discretization,
    times: &[f64],
) -> Result<MicroProjectionErrors, MmsError> {
    if times.is_empty() {
        return Err(MmsError::EmptyTrajectory);
    }
    let level = problem.quadrature_level(disc.space.partition().max_level());
    let projector = MacroProjector::from_system(&disc.space, &disc.sys, level)?;
    let micro_proj = MicroProjector::new(disc)?;
    let integrate = |data: &FieldData, g: &[Vec<f64>]| {
        let vals: Vec<f64> = times.iter().map(|&t| data.quadratic(&data.coefficients(t), g)).collect();
        if times.len() == 1 {
            vals[0]
        } else {
            trapezoid(times, &vals)
        }
    };
    let v = FieldData::new(&problem.v, disc, &projector, &micro_proj);
    let w = FieldData::new(&problem.w, disc, &projector, &micro_proj);
    Ok(MicroProjectionErrors {
        v_l2_sq: integrate(&v, &v.gram_l2),
        v_h1_sq: integrate(&v, &v.gram_h1),
        w_l2_sq: integrate(&w, &w.gram_l2),
        w_h1_sq: integrate(&w, &w.gram_h1),
    })
}
