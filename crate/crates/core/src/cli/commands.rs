use std::f64::consts::PI;

use crate::geometry::{MacroPartition, MicroMesh};
use crate::indicators::{feedback_loop, FeedbackHistory, FeedbackOptions};
use crate::linalg::CgOptions;
use crate::mms::{
    continuity_experiment, eoc, error_norms, macro_projection_errors, micro_projection_errors,
    scalar_exchange_numerator, ManufacturedProblem, ProblemId,
};
use crate::solver::diagnostics::TimeDerivativeAccumulator;
use crate::solver::{steps_for, ConstantData, Discretization, ModelParams, ReactionLaw, TwoScaleSolver};
use crate::fem::trace::trace_inequality_check;

use super::config::{DtChoice, RunConfig};
use super::output::{num, Output};
use super::pool::fan_out;
use super::{Check, RunError};

fn solver_err(e: impl std::fmt::Display) -> RunError {
    RunError::Solver(e.to_string())
}

fn problem_of(cfg: &RunConfig) -> ManufacturedProblem {
    ManufacturedProblem::new(cfg.problem).with_params(cfg.params)
}

fn discretization(cfg: &RunConfig, partition: &MacroPartition, micro_n: usize) -> Result<Discretization, RunError> {
    let mesh = MicroMesh::new(micro_n, &cfg.gamma_r).map_err(solver_err)?;
    Discretization::new(partition, &mesh).map_err(solver_err)
}

fn pick_dt(cfg: &RunConfig, problem: &ManufacturedProblem, h: f64) -> f64 {
    match cfg.dt {
        DtChoice::MeshSize => problem.default_dt(h),
        DtChoice::Fixed(dt) => dt,
    }
}

fn time_grid(t_final: f64, dt: f64) -> Result<Vec<f64>, RunError> {
    let n = steps_for(t_final, dt).map_err(solver_err)?;
    Ok((0..=n).map(|k| k as f64 * dt).collect())
}

fn solver<'a>(
    cfg: &RunConfig,
    disc: &'a Discretization,
    problem: &'a ManufacturedProblem,
    dt: f64,
) -> Result<TwoScaleSolver<'a>, RunError> {
    Ok(TwoScaleSolver::new(disc, problem.params, problem, dt)
        .map_err(solver_err)?
        .with_method(cfg.method)
        .with_cg_options(CgOptions { tol: cfg.cg_tol, max_iter: None }))
}

pub fn solve(cfg: &RunConfig, out: &mut Output) -> Result<Vec<Check>, RunError> {
    let problem = problem_of(cfg);
    let disc = discretization(cfg, &MacroPartition::uniform(cfg.level), cfg.micro_n)?;
    let dt = pick_dt(cfg, &problem, disc.h_omega());
    let traj = solver(cfg, &disc, &problem, dt)?.solve().map_err(solver_err)?;

    let mut body = String::from("t,kind,index,value\n");
    for s in &traj.states {
        s.write_csv_rows(&mut body);
    }
    out.write("trajectory.csv", &body)?;
    out.write("diagnostics.csv", &format!("t,residual,cg_iters\n{}", traj.diagnostics_csv_rows()))?;

    let last = traj.states.last().ok_or_else(|| RunError::Solver("empty trajectory".into()))?;
    let mut body = String::from("x y value\n");
    for i in 0..disc.n_macro() {
        let x = disc.space.node(i);
        body.push_str(&format!("{} {} {}\n", num(x[0]), num(x[1]), num(last.a[i])));
    }
    out.write("macro_u.csv", &body)?;

    let n2 = disc.n_micro();
    for (name, field) in [("micro_v.csv", &last.b), ("micro_w.csv", &last.c)] {
        let mut body = String::from("x y y1 y2 value\n");
        for p in &cfg.probes {
            for j in 0..n2 {
                let column: Vec<f64> = (0..disc.n_macro()).map(|i| field[i * n2 + j]).collect();
                let (val, _) = disc.space.evaluate(&column, *p).ok_or_else(|| RunError::Solver(format!("probe {p:?} outside the domain")))?;
                let y = disc.micro.node(j);
                body.push_str(&format!("{} {} {} {} {}\n", num(p[0]), num(p[1]), num(y[0]), num(y[1]), num(val)));
            }
        }
        out.write(name, &body)?;
    }

    let e = error_norms(&problem, &disc, &traj).map_err(solver_err)?;
    let rows = [
        ("dt", dt),
        ("steps", (traj.states.len() - 1) as f64),
        ("u_l2", e.u_l2()),
        ("u_h1", e.u_h1()),
        ("e1_h1", e.e1_h1_sq.max(0.0).sqrt()),
        ("e2_h1", e.e2_h1()),
        ("v_x", e.v_x()),
        ("w_x", e.w_x()),
        ("pythagoras_defect", e.pythagoras_defect),
    ];
    let body: String = rows.iter().map(|(k, v)| format!("{k},{}\n", num(*v))).collect();
    out.write("errors.csv", &format!("quantity,value\n{body}"))?;
    Ok(Vec::new())
}

pub fn refine_loop(cfg: &RunConfig, out: &mut Output) -> Result<Vec<Check>, RunError> {
    let problem = problem_of(cfg);
    let opts = FeedbackOptions {
        beta: cfg.beta,
        iters: cfg.iters,
        tol: cfg.refine_tol,
        micro_n: cfg.micro_n,
        gamma_r: cfg.gamma_r.clone(),
        initial: MacroPartition::uniform(cfg.level),
        dt: match cfg.dt {
            DtChoice::MeshSize => None,
            DtChoice::Fixed(dt) => Some(dt),
        },
        method: cfg.method,
        solve: true,
    };
    let history = feedback_loop(&problem, &opts).map_err(solver_err)?;
    out.write("history.csv", &format!("{}\n{}", FeedbackHistory::CSV_HEADER, history.csv_rows()))?;
    for st in &history.steps {
        out.write(&format!("partitions/generation_{:03}.txt", st.iter), &st.partition.to_dump())?;
    }
    Ok(Vec::new())
}

struct LevelRow {
    level: u8,
    h: f64,
    dt: f64,
    proj_l2: f64,
    proj_h1: f64,
    norms: crate::mms::ErrorNorms,
}

pub fn mms_verify(cfg: &RunConfig, out: &mut Output, workers: usize) -> Result<Vec<Check>, RunError> {
    let problem = problem_of(cfg);
    let rows = fan_out(cfg.mms_levels.len(), workers, |k| -> Result<LevelRow, RunError> {
        let level = cfg.mms_levels[k];
        let disc = discretization(cfg, &MacroPartition::uniform(level), cfg.micro_n)?;
        let dt = pick_dt(cfg, &problem, disc.h_omega());
        let times = time_grid(problem.params.t_final, dt)?;
        let proj = macro_projection_errors(&problem, &disc, &times).map_err(solver_err)?;
        let traj = solver(cfg, &disc, &problem, dt)?.solve().map_err(solver_err)?;
        let norms = error_norms(&problem, &disc, &traj).map_err(solver_err)?;
        Ok(LevelRow { level, h: disc.h_omega(), dt, proj_l2: proj.l2_sq.sqrt(), proj_h1: proj.h1_sq.sqrt(), norms })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let mut body = String::from("level,h,dt,proj_l2,proj_h1,u_l2,u_h1,e1_h1,e2_h1,v_x,w_x,pythagoras_defect\n");
    for r in &rows {
        let e = &r.norms;
        body.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.level,
            num(r.h),
            num(r.dt),
            num(r.proj_l2),
            num(r.proj_h1),
            num(e.u_l2()),
            num(e.u_h1()),
            num(e.e1_h1_sq.max(0.0).sqrt()),
            num(e.e2_h1()),
            num(e.v_x()),
            num(e.w_x()),
            num(e.pythagoras_defect)
        ));
    }
    out.write("errors.csv", &body)?;

    let macro_disc = discretization(cfg, &MacroPartition::uniform(cfg.level), cfg.mms_micro[0])?;
    let times = time_grid(problem.params.t_final, pick_dt(cfg, &problem, macro_disc.h_omega()))?;
    let micro = fan_out(cfg.mms_micro.len(), workers, |k| -> Result<(f64, [f64; 4]), RunError> {
        let disc = discretization(cfg, &MacroPartition::uniform(cfg.level), cfg.mms_micro[k])?;
        let e = micro_projection_errors(&problem, &disc, &times).map_err(solver_err)?;
        Ok((disc.h_y(), [e.v_l2_sq.sqrt(), e.v_h1_sq.sqrt(), e.w_l2_sq.sqrt(), e.w_h1_sq.sqrt()]))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let mut checks = Vec::new();
    let mut table = String::from("quantity,h,error,eoc\n");
    let macro_series: [(&str, Vec<(f64, f64)>, (f64, f64)); 2] = [
        ("macro_l2", rows.iter().map(|r| (r.h, r.proj_l2)).collect(), (2.0, 0.2)),
        ("macro_h1", rows.iter().map(|r| (r.h, r.proj_h1)).collect(), (1.0, 0.2)),
    ];
    let micro_series: Vec<(&str, Vec<(f64, f64)>, (f64, f64))> = ["micro_v_l2", "micro_v_h1", "micro_w_l2", "micro_w_h1"]
        .iter()
        .enumerate()
        .map(|(c, name)| (*name, micro.iter().map(|(h, e)| (*h, e[c])).collect(), (if c % 2 == 0 { 2.0 } else { 1.0 }, 0.3)))
        .collect();
    for (name, series, (rate, tol)) in macro_series.into_iter().chain(micro_series) {
        let table_rows = eoc(&series).ok();
        for (k, (h, e)) in series.iter().enumerate() {
            let slope = match (&table_rows, k) {
                (Some(t), k) if k > 0 => num(t.slopes[k - 1]),
                _ => String::new(),
            };
            table.push_str(&format!("{name},{},{},{slope}\n", num(*h), num(*e)));
        }
        if problem.id == ProblemId::SeparableSmooth {
            match table_rows {
                Some(t) => {
                    checks.push(Check::within(&format!("{name} min eoc"), t.min_slope(), rate, tol));
                    checks.push(Check::within(&format!("{name} max eoc"), t.max_slope(), rate, tol));
                }
                None => checks.push(Check::failed(&format!("{name} eoc"), "rates undefined")),
            }
        }
    }
    out.write("eoc.csv", &table)?;

    match problem.id {
        ProblemId::Constant => {
            let worst = rows
                .iter()
                .flat_map(|r| [r.proj_l2, r.proj_h1, r.norms.u_l2(), r.norms.u_h1(), r.norms.v_x(), r.norms.w_x()])
                .chain(micro.iter().flat_map(|(_, e)| *e))
                .fold(0.0, f64::max);
            checks.push(Check::at_most("max error", worst, 1e-9));
        }
        ProblemId::SeparableSmooth | ProblemId::Layer => {
            let worst = rows.iter().map(|r| r.norms.pythagoras_defect).fold(0.0, f64::max);
            checks.push(Check::at_most("pythagoras defect", worst, 1e-10));
        }
    }
    Ok(checks)
}

pub fn continuity_test(cfg: &RunConfig, out: &mut Output, workers: usize) -> Result<Vec<Check>, RunError> {
    let problem = problem_of(cfg);
    let disc = discretization(cfg, &MacroPartition::uniform(cfg.level), cfg.micro_n)?;
    let dt = pick_dt(cfg, &problem, disc.h_omega());
    let u = &problem.u;
    let base = |t: f64, x: [f64; 2]| u.value(t, x);
    let reports = fan_out(cfg.continuity_eps.len(), workers, |k| {
        let eps = cfg.continuity_eps[k];
        let perturbed = move |t: f64, x: [f64; 2]| u.value(t, x) + eps * (PI * x[0]).sin();
        continuity_experiment(&disc, problem.params, &problem, &base, &perturbed, dt, cfg.method).map_err(solver_err)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let mut body = String::from("eps,numerator,denominator,ratio\n");
    let mut ratios = Vec::new();
    for (eps, r) in cfg.continuity_eps.iter().zip(&reports) {
        let ratio = r.ratio.map(num).unwrap_or_else(|| r.status().to_string());
        body.push_str(&format!("{},{},{},{ratio}\n", num(*eps), num(r.numerator), num(r.denominator)));
        ratios.extend(r.ratio);
    }
    out.write("continuity.csv", &body)?;

    let (got, want) = scalar_exchange(cfg.params.alpha)?;
    out.write(
        "scalar_exchange.csv",
        &format!("computed,closed_form,relative_error\n{},{},{}\n", num(got), num(want), num((got - want).abs() / want)),
    )?;

    let mut checks = Vec::new();
    if ratios.len() == reports.len() {
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(Check::at_most("ratio spread", hi / lo, 1.5));
    } else {
        checks.push(Check::failed("ratio spread", "identical inputs"));
    }
    checks.push(Check::at_most("scalar exchange relative error", (got - want).abs() / want, 1e-6));
    Ok(checks)
}

/// Spatially constant inputs `0` and `delta` with fast micro diffusion.
pub fn scalar_exchange(alpha: f64) -> Result<(f64, f64), RunError> {
    let mesh = MicroMesh::with_top_interface(4).map_err(solver_err)?;
    let disc = Discretization::new(&MacroPartition::uniform(1), &mesh).map_err(solver_err)?;
    let params = ModelParams { d_v: 1e6, alpha, eta: ReactionLaw::Zero, t_final: 0.5, ..ModelParams::default() };
    let (delta, dt) = (0.1, 0.05);
    let zero = |_t: f64, _x: [f64; 2]| 0.0;
    let shifted = |_t: f64, _x: [f64; 2]| delta;
    let data = ConstantData { value: 0.0 };
    let r = continuity_experiment(&disc, params, &data, &zero, &shifted, dt, crate::linalg::BlockMethod::Direct)
        .map_err(solver_err)?;
    let steps = steps_for(params.t_final, dt).map_err(solver_err)?;
    Ok((r.numerator, scalar_exchange_numerator(delta, alpha, disc.sys.s_r, dt, steps)))
}

pub fn trace_check(cfg: &RunConfig, out: &mut Output) -> Result<Vec<Check>, RunError> {
    let disc = discretization(cfg, &MacroPartition::unit(), cfg.micro_n)?;
    let mut rho = cfg.trace_rho.clone();
    rho.sort_by(f64::total_cmp);
    let mut body = String::from("rho,samples,c_required,bounded\n");
    let mut reports = Vec::new();
    for (k, &r) in rho.iter().enumerate() {
        let rep = trace_inequality_check(&disc.sys, r, cfg.trace_samples, cfg.seed.wrapping_add(k as u64)).map_err(solver_err)?;
        body.push_str(&format!("{},{},{},{}\n", num(r), rep.samples, num(rep.c_required), rep.bounded));
        reports.push(rep);
    }
    out.write("trace.csv", &body)?;
    let bounded = reports.iter().all(|r| r.bounded);
    let monotone = reports.windows(2).all(|w| w[1].c_required <= w[0].c_required);
    Ok(vec![
        Check::flag("finite constant for every rho", bounded),
        Check::flag("constant non-increasing in rho", monotone),
    ])
}

pub fn diagnose_dt(cfg: &RunConfig, out: &mut Output, workers: usize) -> Result<Vec<Check>, RunError> {
    let problem = problem_of(cfg);
    let finest = *cfg.mms_levels.iter().max().expect("validated nonempty");
    let dt0 = pick_dt(cfg, &problem, MacroPartition::uniform(finest).h());
    let jobs: Vec<(u8, f64)> = cfg.mms_levels.iter().flat_map(|&l| [(l, dt0), (l, 0.5 * dt0)]).collect();
    let reports = fan_out(jobs.len(), workers, |k| {
        let (level, dt) = jobs[k];
        let disc = discretization(cfg, &MacroPartition::uniform(level), cfg.micro_n)?;
        let mut acc = TimeDerivativeAccumulator::new(&disc, 1.0);
        solver(cfg, &disc, &problem, dt)?.run(|s| acc.push(s)).map_err(solver_err)?;
        acc.finish().map(|r| (disc.h_omega(), r)).map_err(solver_err)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let mut body = String::from("level,h,dt,lhs,time_derivative_norm,grad_l2,c_initial,mass_l2\n");
    for ((level, dt), (h, r)) in jobs.iter().zip(&reports) {
        body.push_str(&format!(
            "{level},{},{},{},{},{},{},{}\n",
            num(*h),
            num(*dt),
            num(r.lhs),
            num(r.time_derivative_norm()),
            num(r.grad_l2),
            num(r.c_initial),
            num(r.mass_l2)
        ));
    }
    out.write("diagnostic.csv", &body)?;

    let lhs: Vec<f64> = reports.iter().step_by(2).map(|(_, r)| r.lhs).collect();
    let hi = lhs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = lhs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut checks = vec![Check::at_most("lhs spread across levels", hi / lo, 2.0)];
    for (pair, level) in reports.chunks(2).zip(&cfg.mms_levels) {
        let (coarse, fine) = (pair[0].1.time_derivative_norm(), pair[1].1.time_derivative_norm());
        checks.push(Check::at_most(&format!("level {level} dt-halving change"), (coarse - fine).abs() / fine, 0.1));
    }
    Ok(checks)
}
