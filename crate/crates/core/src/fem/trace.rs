use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::system::FeSystem;
use super::FemError;

/// Outcome of sampling the interpolation-trace inequality
/// `int_{∂Y} f^2 <= rho int_Y |grad f|^2 + c_rho int_Y f^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceReport {
    pub rho: f64,
    pub samples: usize,
    /// Smallest constant valid for every sample.
    pub c_required: f64,
    /// Whether `c_required` is finite (a single constant dominates all samples).
    pub bounded: bool,
}

/// Terms `(trace, grad, mass)` of a single micro coefficient vector.
pub fn trace_terms(sys: &FeSystem, f: &[f64]) -> (f64, f64, f64) {
    (sys.b_boundary.bilinear(f, f), sys.k_y.bilinear(f, f), sys.m_y.bilinear(f, f))
}

/// Samples `samples` random micro functions (coefficients uniform in `[-1, 1]`,
/// seeded) plus the constant function and reports the required `c_rho`.
pub fn trace_inequality_check(sys: &FeSystem, rho: f64, samples: usize, seed: u64) -> Result<TraceReport, FemError> {
    if !(rho > 0.0) {
        return Err(FemError::InvalidRho(rho));
    }
    if samples == 0 {
        return Err(FemError::NoSamples);
    }
    let n2 = sys.n_micro();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = {
        let (tr, gr, ms) = trace_terms(sys, &vec![1.0; n2]);
        (tr - rho * gr) / ms
    };
    for _ in 0..samples {
        let f: Vec<f64> = (0..n2).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let (tr, gr, ms) = trace_terms(sys, &f);
        worst = worst.max((tr - rho * gr) / ms);
    }
    Ok(TraceReport { rho, samples, c_required: worst, bounded: worst.is_finite() })
}
