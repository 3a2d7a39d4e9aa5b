use std::fmt;

use super::fields::{MacroField, MacroTerm, Poly, Shape, Trig, TwoScaleField, TwoScaleTerm};
use super::MmsError;
use crate::geometry::Side;
use crate::solver::{Discretization, Forcing, Loads, ModelParams, ProblemData, ReactionLaw};

/// Registered manufactured problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemId {
    Constant,
    SeparableSmooth,
    Layer,
}

impl ProblemId {
    pub const ALL: [ProblemId; 3] = [ProblemId::Constant, ProblemId::SeparableSmooth, ProblemId::Layer];

    pub fn name(self) -> &'static str {
        match self {
            ProblemId::Constant => "constant",
            ProblemId::SeparableSmooth => "separable-smooth",
            ProblemId::Layer => "layer",
        }
    }

    pub fn parse(s: &str) -> Result<Self, MmsError> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| MmsError::UnknownProblem(s.to_string()))
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Width of the interior layer of the `layer` problem.
pub const LAYER_WIDTH: f64 = 0.02;

/// Exact fields `U*`, `v*`, `w*` together with the model parameters the
/// forcing is built for. The forcing is the weak residual of the exact fields,
/// so any flux mismatch on the micro boundary is carried by the load.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedProblem {
    pub id: ProblemId,
    pub params: ModelParams,
    pub u: MacroField,
    pub v: TwoScaleField,
    pub w: TwoScaleField,
    /// Composite quadrature cells are no coarser than this level.
    pub quad_level: u8,
}

pub fn make_problem(id: &str) -> Result<ManufacturedProblem, MmsError> {
    Ok(ManufacturedProblem::new(ProblemId::parse(id)?))
}

fn smooth_micro_fields() -> (TwoScaleField, TwoScaleField) {
    let grow = Poly::linear(1.0, 1.0);
    let v = TwoScaleField::new(vec![TwoScaleTerm {
        time: grow.clone(),
        x: Shape::Trig { offset: 1.0, amp: 0.5, f: Trig::Sin, g: Trig::Sin },
        y: Shape::Trig { offset: 1.0, amp: 0.5, f: Trig::Cos, g: Trig::Cos },
    }]);
    let w = TwoScaleField::new(vec![TwoScaleTerm {
        time: grow,
        x: Shape::Trig { offset: 1.0, amp: 0.25, f: Trig::Cos, g: Trig::Cos },
        y: Shape::Trig { offset: 1.0, amp: 0.5, f: Trig::Cos, g: Trig::Sin },
    }]);
    (v, w)
}

impl ManufacturedProblem {
    pub fn new(id: ProblemId) -> Self {
        match id {
            ProblemId::Constant => Self::constant(1.5),
            ProblemId::SeparableSmooth => {
                let u = MacroField::new(vec![
                    MacroTerm {
                        time: Poly::linear(1.0, 1.0),
                        shape: Shape::Trig { offset: 0.0, amp: 1.0, f: Trig::Sin, g: Trig::Sin },
                    },
                    MacroTerm { time: Poly::constant(1.0), shape: Shape::ONE },
                ]);
                let (v, w) = smooth_micro_fields();
                Self { id, params: ModelParams::default(), u, v, w, quad_level: 3 }
            }
            ProblemId::Layer => {
                let u = MacroField::new(vec![
                    MacroTerm {
                        time: Poly::linear(1.0, 1.0),
                        shape: Shape::Layer { centre: 0.5, width: LAYER_WIDTH },
                    },
                    MacroTerm { time: Poly::constant(2.0), shape: Shape::ONE },
                ]);
                let (v, w) = smooth_micro_fields();
                let params = ModelParams { t_final: 0.25, ..ModelParams::default() };
                Self { id, params, u, v, w, quad_level: 7 }
            }
        }
    }

    /// `U* = v* = w* = c` with no reaction.
    pub fn constant(c: f64) -> Self {
        Self {
            id: ProblemId::Constant,
            params: ModelParams { eta: ReactionLaw::Zero, ..ModelParams::default() },
            u: MacroField::constant(c),
            v: TwoScaleField::constant(c),
            w: TwoScaleField::constant(c),
            quad_level: 2,
        }
    }

    pub fn with_params(mut self, params: ModelParams) -> Self {
        self.params = params;
        self
    }

    /// Exact `(U*, grad U*)` at `(t, x)`.
    pub fn exact_u(&self, t: f64, x: [f64; 2]) -> (f64, [f64; 2]) {
        (self.u.value(t, x), self.u.grad(t, x))
    }

    /// Quadrature level used for loads and norms on a space of depth `max_level`.
    pub fn quadrature_level(&self, max_level: u8) -> u8 {
        self.quad_level.max(max_level)
    }

    /// Range `(min, max)` of `v*` and `w*` sampled on a grid of `[0,T] x Ω x Y`
    /// with `samples` points per direction and three time levels.
    pub fn micro_range(&self, samples: usize) -> (f64, f64) {
        let s = samples.max(2);
        let pts: Vec<f64> = (0..s).map(|k| k as f64 / (s - 1) as f64).collect();
        let t = self.params.t_final;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for tt in [0.0, 0.5 * t, t] {
            for &x1 in &pts {
                for &x2 in &pts {
                    for &y1 in &pts {
                        for &y2 in &pts {
                            for f in [&self.v, &self.w] {
                                let val = f.value(tt, [x1, x2], [y1, y2]);
                                lo = lo.min(val);
                                hi = hi.max(val);
                            }
                        }
                    }
                }
            }
        }
        (lo, hi)
    }

    /// Whether the truncation of the reaction law is inactive on the sampled range.
    pub fn reaction_clamp_inactive(&self, samples: usize) -> bool {
        match self.params.eta {
            ReactionLaw::TruncatedBilinear { cap, .. } => {
                let (lo, hi) = self.micro_range(samples);
                lo >= 0.0 && hi <= cap
            }
            _ => true,
        }
    }

    /// Largest `T / n` not exceeding `h` nor the reaction step guard evaluated
    /// with a 25% margin over the exact micro range.
    pub fn default_dt(&self, h: f64) -> f64 {
        let (lo, hi) = self.micro_range(9);
        let l = self.params.eta.lipschitz_on(1.25 * lo.abs().max(hi.abs()));
        let limit = if l > 0.0 { 0.5 / l } else { f64::INFINITY };
        crate::solver::default_dt(self.params.t_final, h.min(limit))
    }
}

impl ProblemData for ManufacturedProblem {
    fn dirichlet(&self, t: f64, x: [f64; 2]) -> f64 {
        self.u.value(t, x)
    }

    fn initial_u(&self, x: [f64; 2]) -> f64 {
        self.u.value(0.0, x)
    }

    fn initial_v(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        self.v.value(0.0, x, y)
    }

    fn initial_w(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        self.w.value(0.0, x, y)
    }

    fn forcing<'a>(&'a self, disc: &'a Discretization) -> Option<Box<dyn Forcing + 'a>> {
        if self.id == ProblemId::Constant && self.params.eta.is_zero() {
            return None;
        }
        Some(Box::new(SeparableForcing::new(self, disc)))
    }
}

/// `c(t) x ⊗ y` contribution to a tensor load vector.
#[derive(Debug, Clone)]
struct OuterTerm {
    time: Poly,
    x: Vec<f64>,
    y: Vec<f64>,
}

#[derive(Debug, Clone)]
struct MacroLoadTerm {
    time: Poly,
    x: Vec<f64>,
}

/// Weak residual loads of a manufactured problem, stored as time polynomials
/// times precomputed spatial load vectors.
#[derive(Debug, Clone)]
pub struct SeparableForcing {
    n_macro: usize,
    n_micro: usize,
    f_u: Vec<MacroLoadTerm>,
    f_v: Vec<OuterTerm>,
    f_w: Vec<OuterTerm>,
}

struct MicroLoads {
    mass: Vec<f64>,
    stiff: Vec<f64>,
    interface: Vec<f64>,
    interface_integral: f64,
}

fn micro_loads(disc: &Discretization, q: &Shape) -> MicroLoads {
    let micro = &disc.micro;
    let n2 = micro.n_dofs();
    let quad = micro.quadrature(4);
    let mass = quad.load(n2, |p| (q.value(p.y), [0.0; 2]));
    let stiff = quad.load(n2, |p| (0.0, q.grad(p.y)));
    let mut interface = vec![0.0; n2];
    for side in Side::ALL {
        if micro.mesh().is_reactive(side) {
            for (o, v) in interface.iter_mut().zip(micro.side_load(side, 4, |y| q.value(y))) {
                *o += v;
            }
        }
    }
    let interface_integral = interface.iter().sum();
    MicroLoads { mass, stiff, interface, interface_integral }
}

impl SeparableForcing {
    pub fn new(problem: &ManufacturedProblem, disc: &Discretization) -> Self {
        let p = &problem.params;
        let space = &disc.space;
        let sys = &disc.sys;
        let quad = space.quadrature(problem.quadrature_level(space.partition().max_level()), 4);
        let mass_load = |s: &Shape| quad.load(space, |_, qp| (s.value(qp.x), [0.0; 2]));
        let ga = p.gamma * p.alpha;

        let mut f_u = Vec::new();
        let mut u_mass = Vec::new();
        for m in &problem.u.terms {
            let lm = mass_load(&m.shape);
            let lk = quad.load(space, |_, qp| (0.0, m.shape.grad(qp.x)));
            f_u.push(MacroLoadTerm { time: m.time.derivative(), x: lm.clone() });
            f_u.push(MacroLoadTerm { time: m.time.clone(), x: lk.iter().map(|k| p.d_u * k).collect() });
            f_u.push(MacroLoadTerm { time: m.time.clone(), x: lm.iter().map(|v| ga * sys.s_r * v).collect() });
            u_mass.push((m.time.clone(), lm));
        }

        let micro_part = |field: &TwoScaleField, diff: f64, exchange: bool, out_u: &mut Vec<MacroLoadTerm>| {
            let mut terms = Vec::new();
            for r in &field.terms {
                let lx = mass_load(&r.x);
                let ml = micro_loads(disc, &r.y);
                terms.push(OuterTerm { time: r.time.derivative(), x: lx.clone(), y: ml.mass.clone() });
                let a = if exchange { p.alpha } else { 0.0 };
                let y: Vec<f64> = ml.stiff.iter().zip(&ml.interface).map(|(k, g)| diff * k + a * g).collect();
                terms.push(OuterTerm { time: r.time.clone(), x: lx.clone(), y });
                if exchange {
                    let g = ml.interface_integral;
                    out_u.push(MacroLoadTerm { time: r.time.clone(), x: lx.iter().map(|v| -ga * g * v).collect() });
                }
            }
            if exchange {
                for (time, lm) in &u_mass {
                    let y: Vec<f64> = sys.t_y.iter().map(|t| -p.alpha * t).collect();
                    terms.push(OuterTerm { time: time.clone(), x: lm.clone(), y });
                }
            }
            terms
        };
        let mut f_v = micro_part(&problem.v, p.d_v, true, &mut f_u);
        let mut f_w = micro_part(&problem.w, p.d_w, false, &mut f_u);

        let reaction = reaction_terms(problem, disc, &mass_load);
        f_v.extend(reaction.iter().cloned());
        f_w.extend(reaction);

        Self { n_macro: disc.n_macro(), n_micro: disc.n_micro(), f_u, f_v, f_w }
    }
}

fn reaction_terms(
    problem: &ManufacturedProblem,
    disc: &Discretization,
    mass_load: &dyn Fn(&Shape) -> Vec<f64>,
) -> Vec<OuterTerm> {
    let micro = &disc.micro;
    let quad = micro.quadrature(4);
    let n2 = micro.n_dofs();
    let mut out = Vec::new();
    match problem.params.eta {
        ReactionLaw::Zero => {}
        ReactionLaw::Linear { k } => {
            for r in problem.v.terms.iter().chain(&problem.w.terms) {
                let y = quad.load(n2, |q| (k * r.y.value(q.y), [0.0; 2]));
                out.push(OuterTerm { time: r.time.clone(), x: mass_load(&r.x), y });
            }
        }
        ReactionLaw::TruncatedBilinear { k, .. } => {
            let space = &disc.space;
            let mq = space.quadrature(problem.quadrature_level(space.partition().max_level()), 4);
            for r in &problem.v.terms {
                for s in &problem.w.terms {
                    let x = mq.load(space, |_, qp| (r.x.value(qp.x) * s.x.value(qp.x), [0.0; 2]));
                    let y = quad.load(n2, |q| (k * r.y.value(q.y) * s.y.value(q.y), [0.0; 2]));
                    out.push(OuterTerm { time: r.time.mul(&s.time), x, y });
                }
            }
        }
    }
    out
}

fn accumulate(terms: &[OuterTerm], t: f64, n1: usize, n2: usize) -> Vec<f64> {
    let mut out = vec![0.0; n1 * n2];
    for term in terms {
        let c = term.time.eval(t);
        if c == 0.0 {
            continue;
        }
        for (i, xi) in term.x.iter().enumerate() {
            let s = c * xi;
            if s == 0.0 {
                continue;
            }
            for (o, yj) in out[i * n2..(i + 1) * n2].iter_mut().zip(&term.y) {
                *o += s * yj;
            }
        }
    }
    out
}

impl Forcing for SeparableForcing {
    fn loads(&self, t: f64) -> Loads {
        let mut f_u = vec![0.0; self.n_macro];
        for term in &self.f_u {
            let c = term.time.eval(t);
            for (o, x) in f_u.iter_mut().zip(&term.x) {
                *o += c * x;
            }
        }
        Loads {
            f_u,
            f_v: accumulate(&self.f_v, t, self.n_macro, self.n_micro),
            f_w: accumulate(&self.f_w, t, self.n_macro, self.n_micro),
        }
    }
}
