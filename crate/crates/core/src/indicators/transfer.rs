use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mms::{ErrorNorms, MACRO_FLOOR};

/// Micro errors measured against macro errors over a sequence of macro meshes
/// at fixed micro resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    /// `||e_v||_X^2 + ||e_w||_X^2` per entry.
    pub micro_sq: Vec<f64>,
    /// `||e_U||^2_{L^2(S,L^2)}` per entry.
    pub macro_sq: Vec<f64>,
    /// Fibrewise micro projection part of `micro_sq` per entry.
    pub projection_sq: Vec<f64>,
    /// Constant of the fit `micro_sq - projection_sq = c macro_sq + floor`,
    /// least squares in relative residuals.
    pub floor: f64,
    /// `(micro_sq - projection_sq - floor) / macro_sq`; `None` where the macro
    /// error is at the floor.
    pub ratios: Vec<Option<f64>>,
    /// `||e_U||_{L^2(S,H^1)} / (sqrt(eps_U) + ||e1_U(0)||)` per entry.
    pub control_ratios: Vec<Option<f64>>,
    /// Spearman correlation of the ratios with the entry index.
    pub spearman_rho: f64,
    /// One-sided p-value of an increasing trend.
    pub growth_p_value: f64,
}

impl TransferReport {
    pub fn at_floor(&self) -> bool {
        self.ratios.iter().all(|r| r.is_none())
    }

    /// Every defined ratio is finite and positive.
    pub fn bounded(&self) -> bool {
        !self.at_floor() && self.ratios.iter().flatten().all(|r| r.is_finite() && *r > 0.0)
    }

    /// Largest over smallest defined ratio.
    pub fn spread(&self) -> f64 {
        let defined: Vec<f64> = self.ratios.iter().flatten().copied().collect();
        let hi = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = defined.iter().copied().fold(f64::INFINITY, f64::min);
        hi / lo
    }

    pub fn status(&self) -> &'static str {
        if self.at_floor() {
            "macro error at floor"
        } else if self.bounded() {
            "bounded"
        } else {
            "unbounded"
        }
    }
}

/// Entries are ordered from coarse to fine macro meshes.
pub fn micromacro_transfer_check(norms: &[ErrorNorms]) -> TransferReport {
    let micro_sq: Vec<f64> = norms.iter().map(|n| n.v_x_sq + n.w_x_sq).collect();
    let macro_sq: Vec<f64> = norms.iter().map(|n| n.u_l2_sq).collect();
    let projection_sq: Vec<f64> = norms.iter().map(|n| n.v_proj_sq + n.w_proj_sq).collect();
    let remainder: Vec<f64> = micro_sq.iter().zip(&projection_sq).map(|(m, p)| m - p).collect();
    let live: Vec<usize> = (0..norms.len()).filter(|&i| macro_sq[i].sqrt() > MACRO_FLOOR).collect();
    let floor = fit_intercept(
        &live.iter().map(|&i| macro_sq[i]).collect::<Vec<_>>(),
        &live.iter().map(|&i| remainder[i]).collect::<Vec<_>>(),
    );
    let ratios: Vec<Option<f64>> = remainder
        .iter()
        .zip(&macro_sq)
        .map(|(m, u)| (u.sqrt() > MACRO_FLOOR).then(|| (m - floor) / u))
        .collect();
    let control_ratios = norms.iter().map(|n| n.macro_control_ratio()).collect();
    let defined: Vec<f64> = ratios.iter().flatten().copied().collect();
    let (spearman_rho, growth_p_value) = spearman(&defined);
    TransferReport { micro_sq, macro_sq, projection_sq, floor, ratios, control_ratios, spearman_rho, growth_p_value }
}

/// Intercept of `y = c x + f` minimising `sum ((y_i - c x_i - f) / y_i)^2`.
fn fit_intercept(x: &[f64], y: &[f64]) -> f64 {
    if x.len() < 2 || y.contains(&0.0) {
        return 0.0;
    }
    let (mut sxx, mut sx1, mut s11, mut sxy, mut s1y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let w = 1.0 / (b * b);
        sxx += w * a * a;
        sx1 += w * a;
        s11 += w;
        sxy += w * a * b;
        s1y += w * b;
    }
    let det = sxx * s11 - sx1 * sx1;
    if det.abs() <= 1e-300 {
        return 0.0;
    }
    (sxx * s1y - sx1 * sxy) / det
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Spearman correlation of `values` with their position, and the one-sided
/// p-value `P(rho' >= rho)` under random order: exact enumeration up to 8
/// values, seeded random permutations beyond.
pub fn spearman(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n < 2 {
        return (0.0, 1.0);
    }
    let rv = ranks(values);
    let pos: Vec<f64> = (1..=n).map(|k| k as f64).collect();
    let rho = pearson(&pos, &rv);
    let mut perm = rv.clone();
    let (mut hits, mut total) = (0usize, 0usize);
    let mut count = |p: &[f64]| {
        total += 1;
        if pearson(&pos, p) >= rho - 1e-12 {
            hits += 1;
        }
    };
    if n <= 8 {
        permute(&mut perm, 0, &mut count);
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..100_000 {
            perm.shuffle(&mut rng);
            count(&perm);
        }
    }
    let p = hits as f64 / total as f64;
    (rho, p)
}

fn permute(v: &mut Vec<f64>, k: usize, f: &mut dyn FnMut(&[f64])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}
