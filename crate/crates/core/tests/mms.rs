use twoscale::fem::quadrature::gauss_legendre;
use twoscale::geometry::{MacroPartition, MicroMesh};
use twoscale::linalg::BlockMethod;
use twoscale::mms::{
    continuity_experiment, error_norms, make_problem, micro_projection_errors, scalar_exchange_numerator,
    ManufacturedProblem, MmsError, ProblemId,
};
use twoscale::solver::{Discretization, FnData, Loads, ModelParams, ProblemData, ReactionLaw, TwoScaleSolver};

fn disc(level: u8, n: usize) -> Discretization {
    Discretization::new(&MacroPartition::uniform(level), &MicroMesh::with_top_interface(n).unwrap()).unwrap()
}

/// Weak residual of the exact fields against every basis function, by direct
/// two-scale quadrature with a 5-point rule.
fn weak_residual_oracle(p: &ManufacturedProblem, d: &Discretization, t: f64, micro: bool) -> Loads {
    let prm = &p.params;
    let space = &d.space;
    let (n1, n2) = (d.n_macro(), d.n_micro());
    let mq = space.quadrature(p.quad_level.max(space.partition().max_level()), 5);
    let yq = d.micro.quadrature(5);
    let edge = gauss_legendre(5);
    let mut f_u = vec![0.0; n1];
    let mut f_v = vec![0.0; n1 * n2];
    let mut f_w = vec![0.0; n1 * n2];
    for qp in &mq.points {
        let x = qp.x;
        let mut gv = vec![0.0; n2];
        let mut gw = vec![0.0; n2];
        for yp in yq.points.iter().filter(|_| micro) {
            let y = yp.y;
            let (v, w) = (p.v.value(t, x, y), p.w.value(t, x, y));
            let (dv, dw) = (p.v.grad_y(t, x, y), p.w.grad_y(t, x, y));
            let eta = prm.eta.eval(v, w);
            let (vt, wt) = (p.v.time_derivative(t, x, y), p.w.time_derivative(t, x, y));
            for k in 0..4 {
                let j = yp.nodes[k];
                let (s, g) = (yp.shape[k], yp.grad[k]);
                gv[j] += yp.weight * ((vt + eta) * s + prm.d_v * (dv[0] * g[0] + dv[1] * g[1]));
                gw[j] += yp.weight * ((wt + eta) * s + prm.d_w * (dw[0] * g[0] + dw[1] * g[1]));
            }
        }
        let u = p.u.value(t, x);
        let mut trace_v = 0.0;
        let hy = d.micro.cell_size();
        let n = d.micro.mesh().n();
        for c in 0..n {
            for &(s, wgt) in &edge {
                let y = [(c as f64 + s) * hy, 1.0];
                let v = p.v.value(t, x, y);
                trace_v += wgt * hy * v;
                let (a, b) = (d.micro.mesh().node_index(c, n), d.micro.mesh().node_index(c + 1, n));
                gv[a] += wgt * hy * prm.alpha * (v - u) * (1.0 - s);
                gv[b] += wgt * hy * prm.alpha * (v - u) * s;
            }
        }
        let ug = p.u.grad(t, x);
        let fu = p.u.time_derivative(t, x) - prm.gamma * prm.alpha * (trace_v - d.sys.s_r * u);
        for (c, dofs) in space.element_dofs(qp.element).iter().enumerate() {
            let phi = qp.shape[c];
            let gphi = qp.grad[c];
            for &(i, wi) in dofs {
                f_u[i] += wi * qp.weight * (fu * phi + prm.d_u * (ug[0] * gphi[0] + ug[1] * gphi[1]));
                for j in 0..n2 {
                    f_v[i * n2 + j] += wi * qp.weight * phi * gv[j];
                    f_w[i * n2 + j] += wi * qp.weight * phi * gw[j];
                }
            }
        }
    }
    Loads { f_u, f_v, f_w }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn separable_forcing_matches_weak_residual() {
    let p = make_problem("separable-smooth").unwrap();
    assert!(p.reaction_clamp_inactive(9));
    let d = disc(5, 4);
    let forcing = p.forcing(&d).expect("separable-smooth carries forcing");
    for t in [0.0, 0.3] {
        let got = forcing.loads(t);
        let want = weak_residual_oracle(&p, &d, t, true);
        assert!(max_diff(&got.f_u, &want.f_u) < 1e-8, "f_u {}", max_diff(&got.f_u, &want.f_u));
        assert!(max_diff(&got.f_v, &want.f_v) < 1e-8, "f_v {}", max_diff(&got.f_v, &want.f_v));
        assert!(max_diff(&got.f_w, &want.f_w) < 1e-8, "f_w {}", max_diff(&got.f_w, &want.f_w));
    }
}

#[test]
fn forcing_matches_oracle_for_other_laws_and_partitions() {
    let base = make_problem("separable-smooth").unwrap();
    let laws = [ReactionLaw::Zero, ReactionLaw::Linear { k: 0.7 }, ReactionLaw::TruncatedBilinear { k: 2.0, cap: 50.0 }];
    let part = MacroPartition::uniform(1).refine(&[twoscale::geometry::DyadicSquare::new(1, 0, 0).unwrap()]).unwrap().partition;
    let d = Discretization::new(&part, &MicroMesh::with_top_interface(4).unwrap()).unwrap();
    for eta in laws {
        let p = base.clone().with_params(ModelParams { eta, d_u: 0.3, d_v: 2.0, d_w: 0.5, alpha: 1.7, gamma: 0.4, t_final: 0.25 });
        let got = p.forcing(&d).unwrap().loads(0.2);
        let want = weak_residual_oracle(&p, &d, 0.2, true);
        for (g, w) in [(&got.f_u, &want.f_u), (&got.f_v, &want.f_v), (&got.f_w, &want.f_w)] {
            assert!(max_diff(g, w) < 1e-8, "{eta:?} {}", max_diff(g, w));
        }
    }
}

#[test]
fn layer_macro_forcing_matches_weak_residual() {
    let p = make_problem("layer").unwrap();
    let d = disc(2, 4);
    let got = p.forcing(&d).unwrap().loads(0.1);
    let want = weak_residual_oracle(&p, &d, 0.1, false);
    assert!(max_diff(&got.f_u, &want.f_u) < 1e-8, "{}", max_diff(&got.f_u, &want.f_u));
}

#[test]
fn constant_problem_has_no_forcing_and_zero_error() {
    let p = make_problem("constant").unwrap();
    let d = disc(2, 4);
    assert!(p.forcing(&d).is_none());
    assert!(d.space.boundary_flags().iter().enumerate().all(|(i, _)| p.dirichlet(0.3, d.space.node(i)) == 1.5));
    let traj = TwoScaleSolver::new(&d, p.params, &p, 0.125).unwrap().solve().unwrap();
    let e = error_norms(&p, &d, &traj).unwrap();
    for v in [e.u_l2_sq, e.u_h1_sq, e.e1_h1_sq, e.e2_h1_sq, e.v_x_sq, e.w_x_sq, e.v_proj_sq, e.w_proj_sq] {
        assert!(v.abs().sqrt() <= 1e-9, "{e:?}");
    }
    assert!(e.macro_control_ratio().is_none());
}

#[test]
fn registry_lookup() {
    for id in ProblemId::ALL {
        assert_eq!(make_problem(id.name()).unwrap().id, id);
    }
    assert!(matches!(make_problem("nope"), Err(MmsError::UnknownProblem(s)) if s == "nope"));
}

#[test]
fn layer_forcing_is_finite() {
    let p = make_problem("layer").unwrap();
    let d = disc(3, 4);
    let f = p.forcing(&d).unwrap();
    for t in [0.0, 0.125, 0.25] {
        let l = f.loads(t);
        assert!(l.f_u.iter().chain(&l.f_v).chain(&l.f_w).all(|v| v.is_finite()));
    }
    for x in [[0.5, 0.3], [0.49, 0.1], [0.0, 1.0]] {
        assert!(p.u.laplacian(0.1, x).is_finite());
    }
}

#[test]
fn pythagoras_split_on_coupled_solve() {
    let p = make_problem("separable-smooth").unwrap();
    let d = disc(3, 4);
    let dt = p.default_dt(d.h_omega());
    let traj = TwoScaleSolver::new(&d, p.params, &p, dt).unwrap().solve().unwrap();
    let e = error_norms(&p, &d, &traj).unwrap();
    assert!(e.pythagoras_defect < 1e-10);
    assert!((e.u_h1_sq - e.e1_h1_sq - e.e2_h1_sq).abs() <= 1e-10 * e.u_h1_sq);
    assert!(e.v_x_sq >= e.v_proj_sq && e.w_x_sq >= e.w_proj_sq);
}

#[test]
fn micro_projection_errors_vanish_for_bilinear_micro_data() {
    use twoscale::mms::{Poly, Shape, TwoScaleField, TwoScaleTerm};
    let mut p = make_problem("separable-smooth").unwrap();
    p.v = TwoScaleField::new(vec![TwoScaleTerm {
        time: Poly::linear(1.0, 2.0),
        x: Shape::Bilinear([1.0, 0.5, 0.0, 0.0]),
        y: Shape::Bilinear([0.2, 1.0, -1.0, 0.3]),
    }]);
    let e = micro_projection_errors(&p, &disc(2, 4), &[0.0, 0.5]).unwrap();
    assert!(e.v_l2_sq.abs() < 1e-24 && e.v_h1_sq.abs() < 1e-24);
    assert!(e.w_h1_sq > 1e-6);
}

fn zero_micro_data() -> impl ProblemData {
    FnData { dirichlet: |_t, _x| 0.0, u0: |_x| 0.0, v0: |_x, _y| 0.0, w0: |_x, _y| 0.0 }
}

#[test]
fn identical_inputs_give_zero_numerator() {
    let d = disc(1, 4);
    let data = zero_micro_data();
    let input = |t: f64, x: [f64; 2]| 1.0 + t * x[0];
    let params = ModelParams { t_final: 0.25, ..ModelParams::default() };
    let r = continuity_experiment(&d, params, &data, &input, &input, 0.125, BlockMethod::Direct).unwrap();
    assert_eq!(r.numerator, 0.0);
    assert_eq!(r.ratio, None);
    assert_eq!(r.status(), "identical inputs");
}

#[test]
fn scalar_exchange_matches_closed_form() {
    let d = disc(1, 4);
    let data = zero_micro_data();
    let delta = 0.1;
    let params = ModelParams { d_v: 1e6, eta: ReactionLaw::Zero, t_final: 0.5, ..ModelParams::default() };
    let dt = 0.05;
    let zero = |_t: f64, _x: [f64; 2]| 0.0;
    let shifted = |_t: f64, _x: [f64; 2]| delta;
    let r = continuity_experiment(&d, params, &data, &zero, &shifted, dt, BlockMethod::Direct).unwrap();
    let want = scalar_exchange_numerator(delta, params.alpha, d.sys.s_r, dt, 10);
    assert!((r.numerator - want).abs() <= 1e-6 * want, "{} vs {want}", r.numerator);
    assert_eq!(r.w_gap_sq, 0.0);
    assert!((r.denominator - delta * delta * 0.5).abs() < 1e-12);
}
