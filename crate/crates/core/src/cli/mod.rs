//! Command-line front end: configuration, orchestration and file outputs.

mod commands;
pub mod config;
pub mod output;
pub mod pool;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use commands::scalar_exchange;
pub use config::{parse_config, parse_config_str, Command, ConfigError, DtChoice, Overrides, RunConfig};
pub use output::{header_line, Output};
pub use pool::{fan_out, worker_count, THREADS_ENV};

#[derive(Debug, Parser)]
#[command(name = "twoscale", version, about = "Two-scale macro-micro reaction-diffusion solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArg,
    /// Configuration file with [model], [mesh], [time], [solver], [refine], [run], ... sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub problem: Option<String>,
    /// Uniform macro level (initial level for refine-loop).
    #[arg(long, global = true)]
    pub level: Option<u8>,
    #[arg(long = "micro-n", global = true)]
    pub micro_n: Option<usize>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub iters: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CommandArg {
    /// Single two-scale run with trajectory and field dumps.
    Solve,
    /// Feedback refinement loop with per-generation history.
    RefineLoop,
    /// Convergence tables against a manufactured solution.
    MmsVerify,
    /// Data-to-solution sweep with frozen macro inputs.
    ContinuityTest,
    /// Sampler for the interpolation-trace inequality.
    TraceCheck,
    /// Time-derivative diagnostic across levels and step sizes.
    DiagnoseDt,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Solve => Command::Solve,
            CommandArg::RefineLoop => Command::RefineLoop,
            CommandArg::MmsVerify => Command::MmsVerify,
            CommandArg::ContinuityTest => Command::ContinuityTest,
            CommandArg::TraceCheck => Command::TraceCheck,
            CommandArg::DiagnoseDt => Command::DiagnoseDt,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid {THREADS_ENV} value '{0}' (expected a positive integer)")]
    Threads(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("acceptance check failed: {}", .0.join("; "))]
    Acceptance(Vec<String>),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Threads(_) => 2,
            RunError::Solver(_) | RunError::Io { .. } => 3,
            RunError::Acceptance(_) => 4,
        }
    }

    pub fn lines(&self) -> Vec<String> {
        match self {
            RunError::Config(c) => c.lines(),
            RunError::Acceptance(v) => v.iter().map(|l| format!("acceptance check failed: {l}")).collect(),
            other => vec![other.to_string()],
        }
    }
}

/// One pass/fail line of a verify mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: String,
    pub target: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value: format!("{value:.6e}"), target: format!("<= {limit:e}"), pass: value <= limit }
    }

    pub fn within(name: &str, value: f64, centre: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value: format!("{value:.4}"),
            target: format!("{centre} +- {tol}"),
            pass: (value - centre).abs() <= tol,
        }
    }

    pub fn flag(name: &str, pass: bool) -> Self {
        Self { name: name.into(), value: pass.to_string(), target: "true".into(), pass }
    }

    pub fn failed(name: &str, why: &str) -> Self {
        Self { name: name.into(), value: why.into(), target: "defined".into(), pass: false }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {} (target {})", if self.pass { "PASS" } else { "FAIL" }, self.name, self.value, self.target)
    }
}

/// Outcome of a successful run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

/// Parses flags and configuration, then runs the selected subcommand.
pub fn run_cli(cli: &Cli, threads: Option<&str>) -> Result<RunReport, RunError> {
    let command = Command::from(cli.command);
    let mut warnings = Vec::new();
    let mut overrides = Overrides {
        problem: cli.problem.clone(),
        level: cli.level,
        micro_n: cli.micro_n,
        dt: cli.dt,
        beta: cli.beta,
        iters: cli.iters,
        out: cli.out.clone(),
        seed: cli.seed,
    };
    if command == Command::Solve && overrides.beta.take().is_some() {
        warnings.push("warning: --beta has no effect on solve and is ignored".to_string());
    }
    let workers = worker_count(threads).map_err(RunError::Threads)?;
    let cfg = parse_config(command, cli.config.as_deref(), &overrides)?;
    let mut report = run(&cfg, workers)?;
    warnings.append(&mut report.warnings);
    report.warnings = warnings;
    Ok(report)
}

/// Runs a validated configuration. Verify modes fail with
/// [`RunError::Acceptance`] when a check does not pass.
pub fn run(cfg: &RunConfig, workers: usize) -> Result<RunReport, RunError> {
    let mut out = Output::create(cfg)?;
    let checks = match cfg.command {
        Command::Solve => commands::solve(cfg, &mut out)?,
        Command::RefineLoop => commands::refine_loop(cfg, &mut out)?,
        Command::MmsVerify => commands::mms_verify(cfg, &mut out, workers)?,
        Command::ContinuityTest => commands::continuity_test(cfg, &mut out, workers)?,
        Command::TraceCheck => commands::trace_check(cfg, &mut out)?,
        Command::DiagnoseDt => commands::diagnose_dt(cfg, &mut out, workers)?,
    };
    if !checks.is_empty() {
        let body: String = checks
            .iter()
            .map(|c| format!("{},{},{},{}\n", c.name, c.value, c.target, if c.pass { "pass" } else { "fail" }))
            .collect();
        out.write("checks.csv", &format!("check,value,target,status\n{body}"))?;
    }
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(Check::line).collect();
    if !failed.is_empty() {
        return Err(RunError::Acceptance(failed));
    }
    Ok(RunReport { files: out.written().to_vec(), checks, warnings: Vec::new() })
}
