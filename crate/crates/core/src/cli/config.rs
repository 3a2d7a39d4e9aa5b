use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;
use toml::{Table, Value};

use crate::geometry::Side;
use crate::linalg::BlockMethod;
use crate::mms::{ManufacturedProblem, ProblemId};
use crate::solver::{ModelParams, ParamError, ReactionLaw};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    RefineLoop,
    MmsVerify,
    ContinuityTest,
    TraceCheck,
    DiagnoseDt,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::RefineLoop => "refine-loop",
            Command::MmsVerify => "mms-verify",
            Command::ContinuityTest => "continuity-test",
            Command::TraceCheck => "trace-check",
            Command::DiagnoseDt => "diagnose-dt",
        }
    }
}

/// Time step selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtChoice {
    /// `T / ceil(T / h)` limited by the reaction step guard.
    MeshSize,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub problem: ProblemId,
    pub params: ModelParams,
    pub level: u8,
    pub micro_n: usize,
    pub gamma_r: Vec<Side>,
    pub dt: DtChoice,
    pub method: BlockMethod,
    pub cg_tol: f64,
    pub beta: f64,
    pub iters: usize,
    pub refine_tol: f64,
    pub out: PathBuf,
    pub seed: u64,
    /// Macro points at which micro fibres are dumped.
    pub probes: Vec<[f64; 2]>,
    pub mms_levels: Vec<u8>,
    pub mms_micro: Vec<usize>,
    pub continuity_eps: Vec<f64>,
    pub trace_rho: Vec<f64>,
    pub trace_samples: usize,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        Self {
            command,
            problem: ProblemId::SeparableSmooth,
            params: ManufacturedProblem::new(ProblemId::SeparableSmooth).params,
            level: 3,
            micro_n: 8,
            gamma_r: vec![Side::Top],
            dt: DtChoice::MeshSize,
            method: BlockMethod::Pcg,
            cg_tol: 1e-12,
            beta: 0.5,
            iters: 12,
            refine_tol: 1e-6,
            out: PathBuf::from("out"),
            seed: 0,
            probes: vec![[0.5, 0.5]],
            mms_levels: vec![3, 4, 5],
            mms_micro: vec![4, 8, 16],
            continuity_eps: vec![1e-1, 1e-2, 1e-3],
            trace_rho: vec![0.1, 1.0, 10.0],
            trace_samples: 500,
        }
    }

    /// Canonical text form; written next to the outputs and hashed.
    pub fn to_toml(&self) -> String {
        let list = |v: Vec<String>| format!("[{}]", v.join(", "));
        let f = |x: f64| format!("{x:?}");
        let mut s = String::new();
        s.push_str("[run]\n");
        s.push_str(&format!("command = \"{}\"\n", self.command.name()));
        s.push_str(&format!("problem = \"{}\"\n", self.problem.name()));
        s.push_str(&format!("out = \"{}\"\n", self.out.display()));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("probes = {}\n", list(self.probes.iter().map(|p| format!("[{}, {}]", f(p[0]), f(p[1]))).collect())));
        s.push_str("\n[model]\n");
        let p = &self.params;
        for (k, v) in [("d_u", p.d_u), ("d_v", p.d_v), ("d_w", p.d_w), ("alpha", p.alpha), ("gamma", p.gamma), ("t_final", p.t_final)] {
            s.push_str(&format!("{k} = {}\n", f(v)));
        }
        s.push_str(&format!("eta = \"{}\"\n", p.eta.name()));
        match p.eta {
            ReactionLaw::Zero => {}
            ReactionLaw::Linear { k } => s.push_str(&format!("eta_k = {}\n", f(k))),
            ReactionLaw::TruncatedBilinear { k, cap } => {
                s.push_str(&format!("eta_k = {}\neta_cap = {}\n", f(k), f(cap)));
            }
        }
        s.push_str("\n[mesh]\n");
        s.push_str(&format!("level = {}\nmicro_n = {}\n", self.level, self.micro_n));
        s.push_str(&format!(
            "gamma_r = {}\n",
            list(self.gamma_r.iter().map(|g| format!("\"{}\"", g.name())).collect())
        ));
        s.push_str("\n[time]\n");
        match self.dt {
            DtChoice::MeshSize => s.push_str("dt = \"h\"\n"),
            DtChoice::Fixed(dt) => s.push_str(&format!("dt = {}\n", f(dt))),
        }
        s.push_str("\n[solver]\n");
        let method = match self.method {
            BlockMethod::Pcg => "pcg",
            BlockMethod::Direct => "direct",
        };
        s.push_str(&format!("method = \"{method}\"\ncg_tol = {}\n", f(self.cg_tol)));
        s.push_str("\n[refine]\n");
        s.push_str(&format!("beta = {}\niters = {}\ntol = {}\n", f(self.beta), self.iters, f(self.refine_tol)));
        s.push_str("\n[mms]\n");
        s.push_str(&format!("levels = {}\n", list(self.mms_levels.iter().map(|l| l.to_string()).collect())));
        s.push_str(&format!("micro_n = {}\n", list(self.mms_micro.iter().map(|l| l.to_string()).collect())));
        s.push_str("\n[continuity]\n");
        s.push_str(&format!("eps = {}\n", list(self.continuity_eps.iter().map(|v| f(*v)).collect())));
        s.push_str("\n[trace]\n");
        s.push_str(&format!("rho = {}\n", list(self.trace_rho.iter().map(|v| f(*v)).collect())));
        s.push_str(&format!("samples = {}\n", self.trace_samples));
        s
    }

    /// First 16 hex digits of the SHA-256 of [`Self::to_toml`] without the output directory.
    pub fn hash(&self) -> String {
        let text: String = self.to_toml().lines().filter(|l| !l.starts_with("out = ")).map(|l| format!("{l}\n")).collect();
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    /// All constraint violations.
    pub fn validate(&self) -> Result<(), Vec<ParamError>> {
        let mut errs = match self.params.validate() {
            Ok(()) => Vec::new(),
            Err(e) => e,
        };
        let mut push = |assumption: &'static str, message: String| errs.push(ParamError { assumption, message });
        if !(self.beta > 0.0 && self.beta < 1.0) {
            push("marking", format!("beta must lie in the open interval (0,1), got {}", self.beta));
        }
        if self.gamma_r.is_empty() {
            push("A2", "the reactive interface must contain at least one edge of Y".into());
        }
        if self.micro_n == 0 {
            push("mesh", "micro_n must be at least 1".into());
        }
        if self.level > 12 {
            push("mesh", format!("level must not exceed 12, got {}", self.level));
        }
        if let DtChoice::Fixed(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                push("time", format!("dt must be positive, got {dt}"));
            }
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            push("solver", format!("cg_tol must lie in (0,1), got {}", self.cg_tol));
        }
        if self.iters == 0 {
            push("refine", "iters must be at least 1".into());
        }
        if !(self.refine_tol >= 0.0 && self.refine_tol.is_finite()) {
            push("refine", format!("tol must be non-negative, got {}", self.refine_tol));
        }
        if self.probes.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            push("run", "probe points must lie in the unit square".into());
        }
        if self.mms_levels.len() < 2 || self.mms_levels.windows(2).any(|w| w[1] <= w[0]) {
            push("mms", "levels must contain at least two strictly increasing entries".into());
        }
        if self.mms_micro.len() < 2 || self.mms_micro.windows(2).any(|w| w[1] <= w[0]) || self.mms_micro[0] == 0 {
            push("mms", "micro_n must contain at least two strictly increasing positive entries".into());
        }
        if self.continuity_eps.is_empty() || self.continuity_eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            push("continuity", "eps must be a nonempty list of positive values".into());
        }
        if self.trace_rho.is_empty() || self.trace_rho.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            push("trace", "rho must be a nonempty list of positive values".into());
        }
        if self.trace_samples == 0 {
            push("trace", "samples must be at least 1".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub problem: Option<String>,
    pub level: Option<u8>,
    pub micro_n: Option<usize>,
    pub dt: Option<f64>,
    pub beta: Option<f64>,
    pub iters: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed configuration: {0}")]
    Syntax(String),
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key '{key}' in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("key '{key}' in [{section}] must be {expected}")]
    WrongType { section: String, key: String, expected: &'static str },
    #[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<ParamError>),
}

impl ConfigError {
    /// Every problem found, as display lines.
    pub fn lines(&self) -> Vec<String> {
        match self {
            ConfigError::Invalid(v) => v.iter().map(|e| e.to_string()).collect(),
            other => vec![other.to_string()],
        }
    }
}

/// Reads `path` (if any), applies `overrides`, validates.
pub fn parse_config(command: Command, path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.to_path_buf(), source })?,
        None => String::new(),
    };
    parse_config_str(command, &text, overrides)
}

pub fn parse_config_str(command: Command, text: &str, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    let mut cfg = RunConfig::defaults(command);
    let mut errors = Vec::new();
    let mut model: Vec<(&str, f64)> = Vec::new();
    let (mut eta_name, mut eta_k, mut eta_cap) = (None, None, None);

    for (section, body) in &table {
        let Value::Table(body) = body else {
            return Err(ConfigError::WrongType { section: section.clone(), key: String::new(), expected: "a section" });
        };
        let r = Reader { section, body };
        match section.as_str() {
            "run" => {
                r.allow(&["command", "problem", "out", "seed", "probes"])?;
                if let Some(c) = r.string("command")? {
                    if c != command.name() {
                        errors.push(ParamError {
                            assumption: "run",
                            message: format!("config is for '{c}' but '{}' was requested", command.name()),
                        });
                    }
                }
                if let Some(p) = r.string("problem")? {
                    match ProblemId::parse(&p) {
                        Ok(id) => cfg.problem = id,
                        Err(e) => errors.push(ParamError { assumption: "run", message: e.to_string() }),
                    }
                }
                if let Some(o) = r.string("out")? {
                    cfg.out = PathBuf::from(o);
                }
                if let Some(s) = r.integer("seed")? {
                    cfg.seed = s as u64;
                }
                if let Some(v) = r.array("probes")? {
                    cfg.probes = v
                        .iter()
                        .map(|p| match p.as_array().map(|a| a.iter().map(as_f64).collect::<Vec<_>>()) {
                            Some(c) if c.len() == 2 && c.iter().all(|x| x.is_some()) => Ok([c[0].unwrap(), c[1].unwrap()]),
                            _ => Err(r.wrong("probes", "a list of [x, y] pairs")),
                        })
                        .collect::<Result<_, _>>()?;
                }
            }
            "model" => {
                r.allow(&["d_u", "d_v", "d_w", "alpha", "gamma", "t_final", "eta", "eta_k", "eta_cap"])?;
                for key in SCALAR_KEYS {
                    if let Some(v) = r.float(key)? {
                        model.push((key, v));
                    }
                }
                eta_name = r.string("eta")?;
                eta_k = r.float("eta_k")?;
                eta_cap = r.float("eta_cap")?;
            }
            "mesh" => {
                r.allow(&["level", "micro_n", "gamma_r"])?;
                if let Some(v) = r.integer("level")? {
                    cfg.level = u8::try_from(v).map_err(|_| r.wrong("level", "an integer in 0..=255"))?;
                }
                if let Some(v) = r.integer("micro_n")? {
                    cfg.micro_n = usize::try_from(v).map_err(|_| r.wrong("micro_n", "a non-negative integer"))?;
                }
                if let Some(v) = r.get("gamma_r") {
                    let names: Vec<&str> = match v {
                        Value::String(s) => vec![s.as_str()],
                        Value::Array(a) => a.iter().map(|x| x.as_str().ok_or_else(|| r.wrong("gamma_r", "side names"))).collect::<Result<_, _>>()?,
                        _ => return Err(r.wrong("gamma_r", "a side name or a list of side names")),
                    };
                    cfg.gamma_r.clear();
                    for n in names {
                        match Side::parse(n) {
                            Some(s) => cfg.gamma_r.push(s),
                            None => errors.push(ParamError { assumption: "A2", message: format!("unknown side '{n}'") }),
                        }
                    }
                }
            }
            "time" => {
                r.allow(&["dt"])?;
                match r.get("dt") {
                    None => {}
                    Some(Value::String(s)) if s == "h" => cfg.dt = DtChoice::MeshSize,
                    Some(v) => match as_f64(v) {
                        Some(x) => cfg.dt = DtChoice::Fixed(x),
                        None => return Err(r.wrong("dt", "a number or \"h\"")),
                    },
                }
            }
            "solver" => {
                r.allow(&["method", "cg_tol"])?;
                if let Some(m) = r.string("method")? {
                    cfg.method = match m.as_str() {
                        "pcg" => BlockMethod::Pcg,
                        "direct" => BlockMethod::Direct,
                        _ => return Err(r.wrong("method", "\"pcg\" or \"direct\"")),
                    };
                }
                if let Some(v) = r.float("cg_tol")? {
                    cfg.cg_tol = v;
                }
            }
            "refine" => {
                r.allow(&["beta", "iters", "tol"])?;
                if let Some(v) = r.float("beta")? {
                    cfg.beta = v;
                }
                if let Some(v) = r.integer("iters")? {
                    cfg.iters = usize::try_from(v).map_err(|_| r.wrong("iters", "a non-negative integer"))?;
                }
                if let Some(v) = r.float("tol")? {
                    cfg.refine_tol = v;
                }
            }
            "mms" => {
                r.allow(&["levels", "micro_n"])?;
                if let Some(v) = r.array("levels")? {
                    cfg.mms_levels = v
                        .iter()
                        .map(|x| x.as_integer().and_then(|i| u8::try_from(i).ok()).ok_or_else(|| r.wrong("levels", "a list of levels")))
                        .collect::<Result<_, _>>()?;
                }
                if let Some(v) = r.array("micro_n")? {
                    cfg.mms_micro = v
                        .iter()
                        .map(|x| x.as_integer().and_then(|i| usize::try_from(i).ok()).ok_or_else(|| r.wrong("micro_n", "a list of integers")))
                        .collect::<Result<_, _>>()?;
                }
            }
            "continuity" => {
                r.allow(&["eps"])?;
                if let Some(v) = r.float_list("eps")? {
                    cfg.continuity_eps = v;
                }
            }
            "trace" => {
                r.allow(&["rho", "samples"])?;
                if let Some(v) = r.float_list("rho")? {
                    cfg.trace_rho = v;
                }
                if let Some(v) = r.integer("samples")? {
                    cfg.trace_samples = usize::try_from(v).map_err(|_| r.wrong("samples", "a non-negative integer"))?;
                }
            }
            other => return Err(ConfigError::UnknownSection(other.to_string())),
        }
    }

    if let Some(p) = &overrides.problem {
        match ProblemId::parse(p) {
            Ok(id) => cfg.problem = id,
            Err(e) => errors.push(ParamError { assumption: "run", message: e.to_string() }),
        }
    }

    cfg.params = ManufacturedProblem::new(cfg.problem).params;
    for (key, v) in model {
        let p = &mut cfg.params;
        match key {
            "d_u" => p.d_u = v,
            "d_v" => p.d_v = v,
            "d_w" => p.d_w = v,
            "alpha" => p.alpha = v,
            "gamma" => p.gamma = v,
            _ => p.t_final = v,
        }
    }
    if eta_name.is_some() || eta_k.is_some() || eta_cap.is_some() {
        let (k0, cap0) = match cfg.params.eta {
            ReactionLaw::Zero => (1.0, 1.0e3),
            ReactionLaw::Linear { k } => (k, 1.0e3),
            ReactionLaw::TruncatedBilinear { k, cap } => (k, cap),
        };
        let name = eta_name.unwrap_or_else(|| cfg.params.eta.name().to_string());
        match ReactionLaw::parse(&name, eta_k.unwrap_or(k0), eta_cap.unwrap_or(cap0)) {
            Some(law) => cfg.params.eta = law,
            None => errors.push(ParamError {
                assumption: "A4",
                message: format!("unknown reaction law '{name}' (expected zero, linear or truncated-bilinear)"),
            }),
        }
    }
    if let Some(v) = overrides.level {
        cfg.level = v;
    }
    if let Some(v) = overrides.micro_n {
        cfg.micro_n = v;
    }
    if let Some(v) = overrides.dt {
        cfg.dt = DtChoice::Fixed(v);
    }
    if let Some(v) = overrides.beta {
        cfg.beta = v;
    }
    if let Some(v) = overrides.iters {
        cfg.iters = v;
    }
    if let Some(v) = &overrides.out {
        cfg.out = v.clone();
    }
    if let Some(v) = overrides.seed {
        cfg.seed = v;
    }

    if let Err(mut e) = cfg.validate() {
        errors.append(&mut e);
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(errors))
    }
}

const SCALAR_KEYS: [&str; 6] = ["d_u", "d_v", "d_w", "alpha", "gamma", "t_final"];

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

struct Reader<'a> {
    section: &'a str,
    body: &'a Table,
}

impl Reader<'_> {
    fn allow(&self, keys: &[&str]) -> Result<(), ConfigError> {
        match self.body.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(ConfigError::UnknownKey { section: self.section.to_string(), key: k.clone() }),
            None => Ok(()),
        }
    }

    fn wrong(&self, key: &str, expected: &'static str) -> ConfigError {
        ConfigError::WrongType { section: self.section.to_string(), key: key.to_string(), expected }
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.body.get(key)
    }

    fn float(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(key).map(|v| as_f64(v).ok_or_else(|| self.wrong(key, "a number"))).transpose()
    }

    fn integer(&self, key: &str) -> Result<Option<i64>, ConfigError> {
        self.get(key).map(|v| v.as_integer().ok_or_else(|| self.wrong(key, "an integer"))).transpose()
    }

    fn string(&self, key: &str) -> Result<Option<String>, ConfigError> {
        self.get(key).map(|v| v.as_str().map(str::to_string).ok_or_else(|| self.wrong(key, "a string"))).transpose()
    }

    fn array(&self, key: &str) -> Result<Option<&Vec<Value>>, ConfigError> {
        self.get(key).map(|v| v.as_array().ok_or_else(|| self.wrong(key, "a list"))).transpose()
    }

    fn float_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.array(key)? {
            None => Ok(None),
            Some(a) => a.iter().map(|v| as_f64(v).ok_or_else(|| self.wrong(key, "a list of numbers"))).collect::<Result<_, _>>().map(Some),
        }
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_toml())
    }
}
