use super::{axpy, dot, norm2, CsrMatrix, LinalgError};

/// Anything that can apply a square linear map.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y)
    }
}

/// `z = P^{-1} r`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Diagonal scaling.
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(diag: &[f64]) -> Self {
        Self { inv_diag: diag.iter().map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 }).collect() }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Relative residual target `||b - Ax|| / ||b||`.
    pub tol: f64,
    /// Iteration cap; `None` selects `10 sqrt(n) + 200`.
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: None }
    }
}

impl CgOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, max_iter: None }
    }

    pub fn iteration_cap(&self, n: usize) -> usize {
        self.max_iter.unwrap_or_else(|| (10.0 * (n as f64).sqrt()) as usize + 200)
    }
}

#[derive(Debug, Clone)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual.
    pub residual: f64,
}

/// Preconditioned conjugate gradients for symmetric positive definite operators.
pub fn pcg<A, P>(op: &A, pre: &P, rhs: &[f64], x0: Option<&[f64]>, opts: CgOptions) -> Result<CgResult, LinalgError>
where
    A: LinearOperator + ?Sized,
    P: Preconditioner + ?Sized,
{
    let n = op.dim();
    if rhs.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, found: rhs.len() });
    }
    if !(opts.tol > 0.0) {
        return Err(LinalgError::InvalidTolerance(opts.tol));
    }
    let bnorm = norm2(rhs);
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(x0) => return Err(LinalgError::DimensionMismatch { expected: n, found: x0.len() }),
        None => vec![0.0; n],
    };
    if bnorm == 0.0 {
        return Ok(CgResult { x: vec![0.0; n], iterations: 0, residual: 0.0 });
    }
    let mut r = vec![0.0; n];
    op.apply(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
    let mut rel = norm2(&r) / bnorm;
    if rel <= opts.tol {
        return Ok(CgResult { x, iterations: 0, residual: rel });
    }
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let cap = opts.iteration_cap(n);
    for it in 1..=cap {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(LinalgError::NotPositiveDefinite { iteration: it, curvature: pap });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        rel = norm2(&r) / bnorm;
        if rel <= opts.tol {
            return Ok(CgResult { x, iterations: it, residual: rel });
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(LinalgError::NoConvergence { iterations: cap, residual: rel })
}

/// Unpreconditioned CG.
pub fn cg_solve<A>(op: &A, rhs: &[f64], opts: CgOptions) -> Result<CgResult, LinalgError>
where
    A: LinearOperator + ?Sized,
{
    pcg(op, &IdentityPreconditioner, rhs, None, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_converges_in_one_step() {
        let id = CsrMatrix::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 4.0];
        let r = cg_solve(&id, &b, CgOptions::default()).unwrap();
        assert_eq!(r.iterations, 1);
        for (x, y) in r.x.iter().zip(b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn two_by_two_spd() {
        let a = CsrMatrix::from_dense(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let r = cg_solve(&a, &[1.0, 0.0], CgOptions::with_tol(1e-14)).unwrap();
        assert!((r.x[0] - 2.0 / 3.0).abs() < 1e-13);
        assert!((r.x[1] + 1.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn reports_non_convergence() {
        let n = 50;
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            d[i * n + i] = 2.0;
            if i > 0 {
                d[i * n + i - 1] = -1.0;
                d[(i - 1) * n + i] = -1.0;
            }
        }
        let a = CsrMatrix::from_dense(n, n, &d);
        let b = vec![1.0; n];
        let err = pcg(&a, &IdentityPreconditioner, &b, None, CgOptions { tol: 1e-12, max_iter: Some(3) }).unwrap_err();
        match err {
            LinalgError::NoConvergence { iterations, residual } => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let id = CsrMatrix::identity(2);
        assert!(matches!(cg_solve(&id, &[1.0, 1.0], CgOptions::with_tol(0.0)), Err(LinalgError::InvalidTolerance(_))));
    }
}
