/// Gauss-Legendre nodes and weights mapped to `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let (x, w): (&[f64], &[f64]) = match n {
        1 => (&[0.0], &[2.0]),
        2 => (&[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8], &[1.0, 1.0]),
        3 => (
            &[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4],
            &[0.555_555_555_555_555_6, 0.888_888_888_888_888_8, 0.555_555_555_555_555_6],
        ),
        4 => (
            &[-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6],
            &[0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9],
        ),
        5 => (
            &[-0.906_179_845_938_664, -0.538_469_310_105_683_1, 0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664],
            &[
                0.236_926_885_056_189_1,
                0.478_628_670_499_366_5,
                0.568_888_888_888_888_9,
                0.478_628_670_499_366_5,
                0.236_926_885_056_189_1,
            ],
        ),
        _ => panic!("Gauss-Legendre rule with {n} points is not tabulated"),
    };
    x.iter().zip(w).map(|(xi, wi)| (0.5 * (xi + 1.0), 0.5 * wi)).collect()
}

/// Tensor rule on `[0,1]^2`: `(xi, eta, weight)`.
pub fn tensor_rule(n: usize) -> Vec<(f64, f64, f64)> {
    let g = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n);
    for &(y, wy) in &g {
        for &(x, wx) in &g {
            out.push((x, y, wx * wy));
        }
    }
    out
}

/// Bilinear shape functions on the unit square, corners counter-clockwise from `(0,0)`.
pub fn q1_shape(xi: f64, eta: f64) -> [f64; 4] {
    [(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), xi * eta, (1.0 - xi) * eta]
}

/// Reference gradients of [`q1_shape`].
pub fn q1_grad(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [[-(1.0 - eta), -(1.0 - xi)], [1.0 - eta, -xi], [eta, xi], [-eta, 1.0 - xi]]
}

/// Element mass and stiffness of the bilinear element on a square of side `h`,
/// integrated with the 2x2 Gauss rule (exact for these integrands).
pub fn q1_element_matrices(h: f64) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
    let mut m = [[0.0; 4]; 4];
    let mut k = [[0.0; 4]; 4];
    for (xi, eta, w) in tensor_rule(2) {
        let n = q1_shape(xi, eta);
        let g = q1_grad(xi, eta);
        for a in 0..4 {
            for b in 0..4 {
                m[a][b] += w * n[a] * n[b] * h * h;
                k[a][b] += w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
            }
        }
    }
    (m, k)
}

/// Mass matrix of the two hat functions on an edge of length `h` (2-point Gauss).
pub fn edge_mass(h: f64) -> [[f64; 2]; 2] {
    let mut m = [[0.0; 2]; 2];
    for (s, w) in gauss_legendre(2) {
        let n = [1.0 - s, s];
        for a in 0..2 {
            for b in 0..2 {
                m[a][b] += w * h * n[a] * n[b];
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials() {
        for n in 1..=5 {
            let deg = 2 * n - 1;
            for p in 0..=deg {
                let s: f64 = gauss_legendre(n).iter().map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn element_matrices_closed_form() {
        let (m, k) = q1_element_matrices(0.5);
        let want_m = [[4.0, 2.0, 1.0, 2.0], [2.0, 4.0, 2.0, 1.0], [1.0, 2.0, 4.0, 2.0], [2.0, 1.0, 2.0, 4.0]];
        let want_k = [[4.0, -1.0, -2.0, -1.0], [-1.0, 4.0, -1.0, -2.0], [-2.0, -1.0, 4.0, -1.0], [-1.0, -2.0, -1.0, 4.0]];
        for a in 0..4 {
            for b in 0..4 {
                assert!((m[a][b] - 0.25 * want_m[a][b] / 36.0).abs() < 1e-15);
                assert!((k[a][b] - want_k[a][b] / 6.0).abs() < 1e-15);
            }
        }
    }
}
