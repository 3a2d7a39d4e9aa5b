use std::fmt;

/// Reaction term `eta(v, w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReactionLaw {
    Zero,
    /// `k (v + w)`.
    Linear { k: f64 },
    /// `k clamp(v, 0, cap) clamp(w, 0, cap)`.
    TruncatedBilinear { k: f64, cap: f64 },
}

impl Default for ReactionLaw {
    fn default() -> Self {
        ReactionLaw::TruncatedBilinear { k: 1.0, cap: 1.0e3 }
    }
}

impl ReactionLaw {
    pub fn eval(&self, v: f64, w: f64) -> f64 {
        match *self {
            ReactionLaw::Zero => 0.0,
            ReactionLaw::Linear { k } => k * (v + w),
            ReactionLaw::TruncatedBilinear { k, cap } => k * v.clamp(0.0, cap) * w.clamp(0.0, cap),
        }
    }

    /// Global constant `L` with `|eta(v1,w1) - eta(v2,w2)| <= L (|v1-v2| + |w1-w2|)`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            ReactionLaw::Zero => 0.0,
            ReactionLaw::Linear { k } => k.abs(),
            ReactionLaw::TruncatedBilinear { k, cap } => k.abs() * cap,
        }
    }

    /// Lipschitz constant on the box `[-r, r]^2`, never larger than [`Self::lipschitz`].
    pub fn lipschitz_on(&self, r: f64) -> f64 {
        match *self {
            ReactionLaw::TruncatedBilinear { k, cap } => k.abs() * cap.min(r.max(0.0)),
            other => other.lipschitz(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ReactionLaw::Zero) || matches!(self, ReactionLaw::Linear { k } if *k == 0.0)
    }

    pub fn parse(name: &str, k: f64, cap: f64) -> Option<Self> {
        match name {
            "zero" => Some(ReactionLaw::Zero),
            "linear" => Some(ReactionLaw::Linear { k }),
            "truncated-bilinear" => Some(ReactionLaw::TruncatedBilinear { k, cap }),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ReactionLaw::Zero => "zero",
            ReactionLaw::Linear { .. } => "linear",
            ReactionLaw::TruncatedBilinear { .. } => "truncated-bilinear",
        }
    }
}

/// Scalar model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub d_u: f64,
    pub d_v: f64,
    pub d_w: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub t_final: f64,
    pub eta: ReactionLaw,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { d_u: 1.0, d_v: 1.0, d_w: 1.0, alpha: 1.0, gamma: 1.0, t_final: 0.5, eta: ReactionLaw::default() }
    }
}

/// A violated modelling assumption.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamError {
    pub assumption: &'static str,
    pub message: String,
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}): {}", self.assumption, self.message)
    }
}

impl ModelParams {
    /// All violations, not just the first.
    pub fn validate(&self) -> Result<(), Vec<ParamError>> {
        let mut errs = Vec::new();
        let mut positive = |assumption: &'static str, name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(ParamError { assumption, message: format!("{name} must be positive, got {v}") });
            }
        };
        positive("A3", "D_U", self.d_u);
        positive("A3", "D_v", self.d_v);
        positive("A3", "D_w", self.d_w);
        positive("model", "alpha", self.alpha);
        positive("model", "gamma", self.gamma);
        positive("model", "T_final", self.t_final);
        match self.eta {
            ReactionLaw::Zero => {}
            ReactionLaw::Linear { k } if !k.is_finite() => {
                errs.push(ParamError { assumption: "A4", message: format!("eta rate must be finite, got {k}") })
            }
            ReactionLaw::TruncatedBilinear { k, cap } if !(k.is_finite() && cap > 0.0 && cap.is_finite()) => {
                errs.push(ParamError {
                    assumption: "A4",
                    message: format!("truncated-bilinear eta needs finite k and a positive finite cap, got k={k}, cap={cap}"),
                })
            }
            _ => {}
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}
