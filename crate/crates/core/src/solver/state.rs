use std::fmt::Write as _;

/// Coefficients of the Galerkin approximations at time `t`; `b` and `c` are
/// laid out micro-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleState {
    pub t: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl TwoScaleState {
    pub fn zeros(n1: usize, n2: usize) -> Self {
        Self { t: 0.0, a: vec![0.0; n1], b: vec![0.0; n1 * n2], c: vec![0.0; n1 * n2] }
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().chain(&self.b).chain(&self.c).all(|v| v.is_finite())
    }

    /// Largest coefficient magnitude of the micro fields.
    pub fn micro_sup(&self) -> f64 {
        self.b.iter().chain(&self.c).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(a, b, c)` concatenated.
    pub fn stacked(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.a.len() + self.b.len() + self.c.len());
        x.extend_from_slice(&self.a);
        x.extend_from_slice(&self.b);
        x.extend_from_slice(&self.c);
        x
    }

    pub fn from_stacked(t: f64, x: &[f64], n1: usize) -> Self {
        let nn = (x.len() - n1) / 2;
        Self { t, a: x[..n1].to_vec(), b: x[n1..n1 + nn].to_vec(), c: x[n1 + nn..].to_vec() }
    }

    /// CSV rows `t,dof_kind,index,value` (no header).
    pub fn write_csv_rows(&self, out: &mut String) {
        for (kind, v) in [("a", &self.a), ("b", &self.b), ("c", &self.c)] {
            for (i, x) in v.iter().enumerate() {
                let _ = writeln!(out, "{:.16e},{kind},{i},{x:.16e}", self.t);
            }
        }
    }
}
