//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twoscale::fem::trace::trace_inequality_check;
use twoscale::fem::{FeSystem, MacroSpace, MicroSpace};
use twoscale::geometry::{DyadicSquare, MacroPartition, MicroMesh};
use twoscale::indicators::{feedback_loop, mark, micromacro_transfer_check, projection_report, FeedbackOptions};
use twoscale::linalg::{kron_apply, BlockMethod, CgOptions, CsrMatrix};
use twoscale::mms::{
    continuity_experiment, eoc, error_norms, macro_projection_errors, micro_projection_errors, scalar_exchange_numerator,
    ManufacturedProblem, ProblemId,
};
use twoscale::solver::diagnostics::TimeDerivativeAccumulator;
use twoscale::solver::{mass_balance, steps_for, ConstantData, Discretization, FnData, ModelParams, ReactionLaw, TwoScaleSolver};

type Outcome = Result<String, String>;

fn disc(level: u8, n: usize) -> Discretization {
    Discretization::new(&MacroPartition::uniform(level), &MicroMesh::with_top_interface(n).unwrap()).unwrap()
}

fn time_grid(t_final: f64, dt: f64) -> Vec<f64> {
    (0..=steps_for(t_final, dt).unwrap()).map(|k| k as f64 * dt).collect()
}

fn verdict(pass: bool, detail: String) -> Outcome {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fmt_slopes(s: &[f64]) -> String {
    s.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(",")
}

fn within(slopes: &[f64], rate: f64, tol: f64) -> bool {
    slopes.iter().all(|s| (s - rate).abs() <= tol)
}

fn elliptic_projection_rates() -> Outcome {
    let start = Instant::now();
    let p = ManufacturedProblem::new(ProblemId::SeparableSmooth);
    let (mut l2, mut h1) = (Vec::new(), Vec::new());
    for level in 3..=5 {
        let d = disc(level, 2);
        let times = time_grid(p.params.t_final, p.default_dt(d.h_omega()));
        let e = macro_projection_errors(&p, &d, &times).map_err(|e| e.to_string())?;
        l2.push((d.h_omega(), e.l2_sq.sqrt()));
        h1.push((d.h_omega(), e.h1_sq.sqrt()));
    }
    let (l2, h1) = (eoc(&l2).map_err(|e| e.to_string())?, eoc(&h1).map_err(|e| e.to_string())?);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        within(&l2.slopes, 2.0, 0.2) && within(&h1.slopes, 1.0, 0.2) && secs < 120.0,
        format!("L2 eoc [{}] (2.0+-0.2), H1 eoc [{}] (1.0+-0.2), {secs:.1} s", fmt_slopes(&l2.slopes), fmt_slopes(&h1.slopes)),
    )
}

fn micro_rates() -> Outcome {
    let start = Instant::now();
    let p = ManufacturedProblem::new(ProblemId::SeparableSmooth);
    let times = time_grid(p.params.t_final, p.default_dt(MacroPartition::uniform(4).h()));
    let mut series = vec![Vec::new(); 4];
    for n in [4, 8, 16] {
        let d = disc(4, n);
        let e = micro_projection_errors(&p, &d, &times).map_err(|e| e.to_string())?;
        for (s, v) in series.iter_mut().zip([e.v_l2_sq, e.v_h1_sq, e.w_l2_sq, e.w_h1_sq]) {
            s.push((d.h_y(), v.sqrt()));
        }
    }
    let tables: Vec<_> = series.iter().map(|s| eoc(s).map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    let secs = start.elapsed().as_secs_f64();
    let pass = within(&tables[0].slopes, 2.0, 0.3)
        && within(&tables[1].slopes, 1.0, 0.3)
        && within(&tables[2].slopes, 2.0, 0.3)
        && within(&tables[3].slopes, 1.0, 0.3)
        && secs < 300.0;
    verdict(
        pass,
        format!(
            "v L2 [{}] H1 [{}], w L2 [{}] H1 [{}] (2.0/1.0 +-0.3), {secs:.1} s",
            fmt_slopes(&tables[0].slopes),
            fmt_slopes(&tables[1].slopes),
            fmt_slopes(&tables[2].slopes),
            fmt_slopes(&tables[3].slopes)
        ),
    )
}

fn micro_from_macro_transfer() -> Outcome {
    let p = ManufacturedProblem::new(ProblemId::SeparableSmooth);
    let mut norms = Vec::new();
    for level in 2..=5 {
        let d = disc(level, 32);
        let h = d.h_omega();
        let dt = p.default_dt(h * h);
        let traj = TwoScaleSolver::new(&d, p.params, &p, dt)
            .map_err(|e| e.to_string())?
            .with_method(BlockMethod::Direct)
            .solve()
            .map_err(|e| e.to_string())?;
        norms.push(error_norms(&p, &d, &traj).map_err(|e| e.to_string())?);
    }
    let r = micromacro_transfer_check(&norms);
    let ratios: Vec<String> = r.ratios.iter().map(|x| x.map_or("floor".into(), |v| format!("{v:.3}"))).collect();
    let growth = r.spearman_rho > 0.0 && r.growth_p_value < 0.05;
    verdict(
        r.bounded() && !growth,
        format!(
            "ratios [{}], spread {:.3}, floor {:.3e}, spearman rho {:.2} (one-sided p {:.3}), status {}",
            ratios.join(","),
            r.spread(),
            r.floor,
            r.spearman_rho,
            r.growth_p_value,
            r.status()
        ),
    )
}

fn continuity_with_data() -> Outcome {
    let p = ManufacturedProblem::new(ProblemId::SeparableSmooth);
    let d = disc(3, 8);
    let dt = p.default_dt(d.h_omega());
    let u = &p.u;
    let base = |t: f64, x: [f64; 2]| u.value(t, x);
    let mut ratios = Vec::new();
    for eps in [1e-1, 1e-2, 1e-3] {
        let pert = move |t: f64, x: [f64; 2]| u.value(t, x) + eps * (std::f64::consts::PI * x[0]).sin();
        let r = continuity_experiment(&d, p.params, &p, &base, &pert, dt, BlockMethod::Direct).map_err(|e| e.to_string())?;
        ratios.push(r.ratio.ok_or("identical inputs")?);
    }
    let spread = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min);

    let ds = disc(1, 4);
    let params = ModelParams { d_v: 1e6, eta: ReactionLaw::Zero, t_final: 0.5, ..ModelParams::default() };
    let (delta, sdt) = (0.1, 0.05);
    let zero = |_t: f64, _x: [f64; 2]| 0.0;
    let shifted = |_t: f64, _x: [f64; 2]| delta;
    let data = ConstantData { value: 0.0 };
    let r = continuity_experiment(&ds, params, &data, &zero, &shifted, sdt, BlockMethod::Direct).map_err(|e| e.to_string())?;
    let want = scalar_exchange_numerator(delta, params.alpha, ds.sys.s_r, sdt, steps_for(params.t_final, sdt).unwrap());
    let rel = (r.numerator - want).abs() / want;
    verdict(
        spread <= 1.5 && rel <= 1e-6,
        format!(
            "ratios [{}] spread {spread:.5} (<= 1.5), scalar exchange relative error {rel:.2e} (<= 1e-6)",
            ratios.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>().join(",")
        ),
    )
}

fn feedback_convergence() -> Outcome {
    let start = Instant::now();
    let p = ManufacturedProblem::new(ProblemId::Layer);
    let opts = FeedbackOptions { beta: 0.5, iters: 8, micro_n: 4, initial: MacroPartition::uniform(1), ..FeedbackOptions::default() };
    let h = feedback_loop(&p, &opts).map_err(|e| e.to_string())?;
    if h.steps.len() != 8 {
        return Err(format!("loop stopped after {} iterations", h.steps.len()));
    }
    let max_nu: Vec<f64> = h.steps.iter().map(|s| s.report.max).collect();
    let e2: Vec<f64> = h.steps.iter().map(|s| s.norms.as_ref().map_or(f64::NAN, |n| n.e2_h1())).collect();
    let decreasing = max_nu.windows(2).all(|w| w[1] < w[0]);
    let non_increasing = e2.windows(2).all(|w| w[1] <= w[0]);

    let last = h.steps.last().unwrap();
    let dofs = last.report.n_dofs as f64;
    let uniform = (1..=9u8).find(|&m| {
        let n = ((1usize << m) + 1).pow(2) as f64;
        (n / dofs - 1.0).abs() <= 0.1
    });
    let Some(m) = uniform else {
        return Err(format!("no uniform partition within 10% of {dofs} DOFs"));
    };
    let part = MacroPartition::uniform(m);
    let times = time_grid(p.params.t_final, p.default_dt(part.h()));
    let uni = projection_report(&p, &part, &times, 0).map_err(|e| e.to_string())?;
    let ratio = last.e2_norm() / uni.sum_of_squares().sqrt();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        decreasing && non_increasing && ratio <= 0.7 && secs < 600.0,
        format!(
            "max nu [{}] strictly decreasing {decreasing}, e2 non-increasing {non_increasing}, adaptive {} DOFs e2 {:.4} vs uniform level {m} {} DOFs e2 {:.4}: ratio {ratio:.3} (<= 0.7), {secs:.1} s",
            max_nu.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(","),
            last.report.n_dofs,
            last.e2_norm(),
            uni.n_dofs,
            uni.sum_of_squares().sqrt()
        ),
    )
}

fn marking_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..1000 {
        let n = rng.gen_range(1..200);
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0f64).powi(3) * 10f64.powi(rng.gen_range(-3..4))).collect();
        let beta = rng.gen_range(0.001..0.999);
        let j = mark(&v, beta).map_err(|e| e.to_string())?;
        if j.is_empty() {
            return Err(format!("trial {trial}: empty marking"));
        }
        let lambda = 10f64.powf(rng.gen_range(-6.0..6.0));
        let scaled: Vec<f64> = v.iter().map(|x| lambda * x).collect();
        if mark(&scaled, beta).map_err(|e| e.to_string())? != j {
            return Err(format!("trial {trial}: marking changed under scaling by {lambda:e}"));
        }
        let c = rng.gen_range(0.0..5.0);
        if mark(&vec![c; n], beta).map_err(|e| e.to_string())?.len() != n {
            return Err(format!("trial {trial}: equal vector not fully marked"));
        }
    }
    Ok("1000 random vectors: nonempty, scale invariant, equal vectors fully marked".into())
}

fn conservation() -> Outcome {
    let c = 1.5;
    let p = ManufacturedProblem::constant(c);
    let params = ModelParams { t_final: 1.0, ..p.params };
    let p = p.with_params(params);
    let d = disc(3, 4);
    let solver = TwoScaleSolver::new(&d, params, &p, 0.01).map_err(|e| e.to_string())?.with_method(BlockMethod::Direct);
    let traj = solver.solve().map_err(|e| e.to_string())?;
    let mut worst_step: f64 = 0.0;
    for w in traj.states.windows(2) {
        let (a, b) = (w[0].stacked(), w[1].stacked());
        let drift = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let off = b.iter().map(|x| (x - c).abs()).fold(0.0, f64::max);
        worst_step = worst_step.max(drift).max(off);
    }
    let steps = traj.states.len() - 1;

    let params = ModelParams { eta: ReactionLaw::Zero, ..ModelParams::default() };
    let data = FnData {
        dirichlet: |_t: f64, x: [f64; 2]| 1.0 + x[0],
        u0: |x: [f64; 2]| 1.0 + x[0] + (std::f64::consts::PI * x[1]).sin(),
        v0: |x: [f64; 2], y: [f64; 2]| 2.0 + x[1] * y[1],
        w0: |_x: [f64; 2], y: [f64; 2]| y[0],
    };
    let solver = TwoScaleSolver::new(&d, params, &data, 0.025).map_err(|e| e.to_string())?.with_cg_options(CgOptions::with_tol(1e-13));
    let traj = solver.solve().map_err(|e| e.to_string())?;
    let mut worst_mass: f64 = 0.0;
    for w in traj.states.windows(2) {
        let mb = mass_balance(&d, &params, &w[0], &w[1], &solver.loads(w[1].t)).map_err(|e| e.to_string())?;
        worst_mass = worst_mass.max(mb.defect());
    }
    verdict(
        steps == 100 && worst_step <= 1e-9 && worst_mass <= 1e-8,
        format!("constant state drift {worst_step:.2e} over {steps} steps (<= 1e-9), mass identity defect {worst_mass:.2e} (<= 1e-8)"),
    )
}

fn trace_sampler() -> Outcome {
    let mesh = MicroMesh::with_top_interface(16).unwrap();
    let space = MacroSpace::new(&MacroPartition::unit()).unwrap();
    let sys = FeSystem::assemble(&space, &MicroSpace::new(&mesh));
    let mut c = Vec::new();
    for (k, rho) in [0.1, 1.0, 10.0].into_iter().enumerate() {
        let r = trace_inequality_check(&sys, rho, 500, 100 + k as u64).map_err(|e| e.to_string())?;
        if !r.bounded {
            return Err(format!("rho {rho}: no finite constant"));
        }
        c.push(r.c_required);
    }
    verdict(
        c.windows(2).all(|w| w[1] <= w[0]),
        format!("c_rho for rho 0.1,1,10: [{}], finite and non-increasing", c.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(",")),
    )
}

fn time_derivative_diagnostic() -> Outcome {
    let p = ManufacturedProblem::new(ProblemId::SeparableSmooth);
    let dt0 = p.default_dt(MacroPartition::uniform(5).h());
    let mut lhs = Vec::new();
    let mut changes = Vec::new();
    for level in 3..=5 {
        let d = disc(level, 8);
        let mut norms = Vec::new();
        for dt in [dt0, 0.5 * dt0] {
            let mut acc = TimeDerivativeAccumulator::new(&d, 1.0);
            TwoScaleSolver::new(&d, p.params, &p, dt)
                .map_err(|e| e.to_string())?
                .with_method(BlockMethod::Direct)
                .run(|s| acc.push(s))
                .map_err(|e| e.to_string())?;
            let r = acc.finish().map_err(|e| e.to_string())?;
            if dt == dt0 {
                lhs.push(r.lhs);
            }
            norms.push(r.time_derivative_norm());
        }
        changes.push((norms[0] - norms[1]).abs() / norms[1]);
    }
    let spread = lhs.iter().copied().fold(f64::NEG_INFINITY, f64::max) / lhs.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(
        spread <= 2.0 && changes.iter().all(|c| *c <= 0.1),
        format!(
            "dt {dt0:.6}: lhs [{}] spread {spread:.4} (<= 2), dt-halving changes [{}] (<= 0.1)",
            lhs.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(","),
            changes.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(",")
        ),
    )
}

fn max_abs_diff(a: &CsrMatrix, b: &CsrMatrix) -> f64 {
    a.to_dense().iter().zip(b.to_dense()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn structural_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut kron_err: f64 = 0.0;
    for _ in 0..100 {
        let (n1, n2) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let a: Vec<f64> = (0..n1 * n1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n2 * n2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..n1 * n2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = kron_apply(&CsrMatrix::from_dense(n1, n1, &a), &CsrMatrix::from_dense(n2, n2, &b), &x);
        for i in 0..n1 {
            for j in 0..n2 {
                let mut want = 0.0;
                for k in 0..n1 {
                    for l in 0..n2 {
                        want += a[i * n1 + k] * b[j * n2 + l] * x[k * n2 + l];
                    }
                }
                kron_err = kron_err.max((got[i * n2 + j] - want).abs());
            }
        }
    }

    let micro = MicroSpace::new(&MicroMesh::with_top_interface(1).unwrap());
    let mut nest_err: f64 = 0.0;
    let mut coarse = MacroPartition::uniform(1);
    for _ in 0..3 {
        let squares: Vec<DyadicSquare> = coarse.squares().copied().collect();
        let mut marked: Vec<DyadicSquare> = squares.iter().filter(|_| rng.gen_bool(0.35)).copied().collect();
        if marked.is_empty() {
            marked.push(squares[0]);
        }
        let fine = coarse.refine(&marked).map_err(|e| e.to_string())?.partition;
        let (sc, sf) = (MacroSpace::new(&coarse).unwrap(), MacroSpace::new(&fine).unwrap());
        let (yc, yf) = (FeSystem::assemble(&sc, &micro), FeSystem::assemble(&sf, &micro));
        let p = sc.prolongation_to(&sf).map_err(|e| e.to_string())?;
        nest_err = nest_err
            .max(max_abs_diff(&yf.m_omega.galerkin_product(&p), &yc.m_omega))
            .max(max_abs_diff(&yf.k_omega.galerkin_product(&p), &yc.k_omega));
        coarse = fine;
    }

    let prob = ManufacturedProblem::new(ProblemId::SeparableSmooth);
    let d = disc(3, 4);
    let traj = TwoScaleSolver::new(&d, prob.params, &prob, prob.default_dt(d.h_omega()))
        .map_err(|e| e.to_string())?
        .with_method(BlockMethod::Direct)
        .solve()
        .map_err(|e| e.to_string())?;
    let pyth = error_norms(&prob, &d, &traj).map_err(|e| e.to_string())?.pythagoras_defect;
    verdict(
        kron_err <= 1e-13 && nest_err <= 1e-12 && pyth <= 1e-10,
        format!("kron vs dense {kron_err:.1e} (<= 1e-13), nested Galerkin {nest_err:.1e} (<= 1e-12), Pythagoras {pyth:.1e} (<= 1e-10)"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("elliptic projection rates", elliptic_projection_rates),
        ("micro projection rates", micro_rates),
        ("micro errors controlled by macro error", micro_from_macro_transfer),
        ("continuity with respect to data", continuity_with_data),
        ("feedback refinement convergence", feedback_convergence),
        ("marking rule properties", marking_properties),
        ("steady state and mass bookkeeping", conservation),
        ("interpolation-trace sampler", trace_sampler),
        ("time-derivative diagnostic", time_derivative_diagnostic),
        ("structural oracles", structural_oracles),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail} [{secs:.1} s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail} [{secs:.1} s]", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
