//! The coupled `(a, b, c)` system solved once per time step.
//!
//! With macro mass `M`, micro factors `A_v`, `A_w`, interface trace vector `t`
//! and exchange rate `alpha`, the operator is
//!
//! ```text
//! | S_aa              -alpha (M ⊗ t^T)   0      |
//! | -alpha (M ⊗ t)     M ⊗ A_v           0      |
//! | 0                  0                 M ⊗ A_w |
//! ```
//!
//! which is symmetric; it is positive definite whenever `S_aa - alpha^2 (t^T A_v^{-1} t) M`
//! is, which holds for the backward-Euler step matrices.

use super::cg::{pcg, CgOptions, LinearOperator, Preconditioner};
use super::kron::{contract_micro, kron_apply};
use super::{CsrMatrix, EnvelopeCholesky, LinalgError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlockMethod {
    /// Conjugate gradients on the full block operator, block-diagonal
    /// preconditioner built from lumped macro mass and factored micro blocks.
    #[default]
    Pcg,
    /// Exact elimination through the Kronecker factors (Schur complement on `a`).
    Direct,
}

/// Block operator of one implicit step. Entries of `a` flagged in `fixed` are
/// prescribed (Dirichlet) and treated as identity rows and columns.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    pub m_omega: CsrMatrix,
    pub a_block: CsrMatrix,
    pub alpha: f64,
    pub t_y: Vec<f64>,
    pub micro_v: CsrMatrix,
    pub micro_w: CsrMatrix,
    pub fixed: Vec<bool>,
}

impl BlockOperator {
    pub fn n_macro(&self) -> usize {
        self.m_omega.rows()
    }

    pub fn n_micro(&self) -> usize {
        self.t_y.len()
    }

    pub fn len(&self) -> usize {
        let (n1, n2) = (self.n_macro(), self.n_micro());
        n1 + 2 * n1 * n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unmasked product with the full operator.
    pub fn apply_full(&self, x: &[f64]) -> Vec<f64> {
        let n1 = self.n_macro();
        let nn = n1 * self.n_micro();
        let (a, rest) = x.split_at(n1);
        let (b, c) = rest.split_at(nn);
        let mut out = Vec::with_capacity(self.len());

        let mut ya = self.a_block.matvec(a);
        let tb = contract_micro(b, &self.t_y);
        let mtb = self.m_omega.matvec(&tb);
        for (y, v) in ya.iter_mut().zip(&mtb) {
            *y -= self.alpha * v;
        }
        out.extend(ya);

        let mut yb = kron_apply(&self.m_omega, &self.micro_v, b);
        let ma = self.m_omega.matvec(a);
        let n2 = self.n_micro();
        for (i, mai) in ma.iter().enumerate() {
            for (j, tj) in self.t_y.iter().enumerate() {
                yb[i * n2 + j] -= self.alpha * mai * tj;
            }
        }
        out.extend(yb);
        out.extend(kron_apply(&self.m_omega, &self.micro_w, c));
        out
    }

    fn apply_masked(&self, x: &[f64], y: &mut [f64]) {
        let n1 = self.n_macro();
        let mut xm = x.to_vec();
        for i in 0..n1 {
            if self.fixed[i] {
                xm[i] = 0.0;
            }
        }
        let full = self.apply_full(&xm);
        y.copy_from_slice(&full);
        for i in 0..n1 {
            if self.fixed[i] {
                y[i] = x[i];
            }
        }
    }

    /// Restriction of `a_block` with fixed rows/columns replaced by identity.
    fn masked_a_block(&self) -> CsrMatrix {
        let n1 = self.n_macro();
        let mut t = super::TripletBuilder::new(n1, n1);
        for i in 0..n1 {
            if self.fixed[i] {
                t.push(i, i, 1.0);
                continue;
            }
            for (j, v) in self.a_block.row(i) {
                if !self.fixed[j] {
                    t.push(i, j, v);
                }
            }
        }
        t.build()
    }
}

struct Masked<'a>(&'a BlockOperator);

impl LinearOperator for Masked<'_> {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply_masked(x, y)
    }
}

/// Cached factorizations reused across steps with the same operator.
#[derive(Debug, Clone)]
pub struct BlockFactors {
    a_chol: EnvelopeCholesky,
    v_chol: EnvelopeCholesky,
    w_chol: EnvelopeCholesky,
    lumped_inv: Vec<f64>,
    m_chol: EnvelopeCholesky,
    /// Schur complement factor on the macro block for the direct path.
    schur_chol: EnvelopeCholesky,
    z: Vec<f64>,
}

impl BlockFactors {
    pub fn new(op: &BlockOperator) -> Result<Self, LinalgError> {
        let a_masked = op.masked_a_block();
        let a_chol = EnvelopeCholesky::factor(&a_masked)?;
        let v_chol = EnvelopeCholesky::factor(&op.micro_v)?;
        let w_chol = EnvelopeCholesky::factor(&op.micro_w)?;
        let lumped_inv = op.m_omega.row_sums().iter().map(|s| 1.0 / s).collect();
        let m_chol = EnvelopeCholesky::factor(&op.m_omega)?;
        let z = v_chol.solve(&op.t_y);
        let tau: f64 = op.t_y.iter().zip(&z).map(|(a, b)| a * b).sum();
        let n1 = op.n_macro();
        let mut t = super::TripletBuilder::new(n1, n1);
        for i in 0..n1 {
            if op.fixed[i] {
                t.push(i, i, 1.0);
                continue;
            }
            for (j, v) in a_masked.row(i) {
                if !op.fixed[j] {
                    t.push(i, j, v);
                }
            }
            for (j, v) in op.m_omega.row(i) {
                if !op.fixed[j] {
                    t.push(i, j, -op.alpha * op.alpha * tau * v);
                }
            }
        }
        let schur_chol = EnvelopeCholesky::factor(&t.build())?;
        Ok(Self { a_chol, v_chol, w_chol, lumped_inv, m_chol, schur_chol, z })
    }

    /// `(L^{-1} ⊗ A^{-1}) r` with lumped macro mass `L`.
    fn lumped_kron_inverse(&self, micro: &EnvelopeCholesky, r: &[f64], n2: usize) -> Vec<f64> {
        let mut out = vec![0.0; r.len()];
        for (k, blk) in r.chunks_exact(n2).enumerate() {
            micro.solve_into(blk, &mut out[k * n2..(k + 1) * n2]);
            for v in &mut out[k * n2..(k + 1) * n2] {
                *v *= self.lumped_inv[k];
            }
        }
        out
    }

    /// `(M^{-1} ⊗ A^{-1}) r` exactly.
    fn kron_inverse(&self, micro: &EnvelopeCholesky, r: &[f64], n1: usize, n2: usize) -> Vec<f64> {
        let mut tmp = vec![0.0; r.len()];
        for (k, blk) in r.chunks_exact(n2).enumerate() {
            micro.solve_into(blk, &mut tmp[k * n2..(k + 1) * n2]);
        }
        let mut col = vec![0.0; n1];
        let mut sol = vec![0.0; n1];
        for j in 0..n2 {
            for i in 0..n1 {
                col[i] = tmp[i * n2 + j];
            }
            self.m_chol.solve_into(&col, &mut sol);
            for i in 0..n1 {
                tmp[i * n2 + j] = sol[i];
            }
        }
        tmp
    }
}

struct BlockPreconditioner<'a> {
    factors: &'a BlockFactors,
    n1: usize,
    n2: usize,
}

impl Preconditioner for BlockPreconditioner<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let (n1, n2) = (self.n1, self.n2);
        let nn = n1 * n2;
        self.factors.a_chol.solve_into(&r[..n1], &mut z[..n1]);
        let zb = self.factors.lumped_kron_inverse(&self.factors.v_chol, &r[n1..n1 + nn], n2);
        z[n1..n1 + nn].copy_from_slice(&zb);
        let zc = self.factors.lumped_kron_inverse(&self.factors.w_chol, &r[n1 + nn..], n2);
        z[n1 + nn..].copy_from_slice(&zc);
    }
}

#[derive(Debug, Clone)]
pub struct BlockSolveResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual of the masked system.
    pub residual: f64,
}

/// Solves `S x = rhs` with the `a` entries flagged in `op.fixed` set to
/// `fixed_values` (the corresponding `rhs` rows are ignored).
pub fn block_solve(
    op: &BlockOperator,
    factors: &BlockFactors,
    rhs: &[f64],
    fixed_values: &[f64],
    method: BlockMethod,
    opts: CgOptions,
) -> Result<BlockSolveResult, LinalgError> {
    let n = op.len();
    if rhs.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, found: rhs.len() });
    }
    let n1 = op.n_macro();
    if fixed_values.len() != n1 {
        return Err(LinalgError::DimensionMismatch { expected: n1, found: fixed_values.len() });
    }
    // Move prescribed values to the right-hand side.
    let mut xd = vec![0.0; n];
    for i in 0..n1 {
        if op.fixed[i] {
            xd[i] = fixed_values[i];
        }
    }
    let sxd = op.apply_full(&xd);
    let mut b: Vec<f64> = rhs.iter().zip(&sxd).map(|(r, s)| r - s).collect();
    for i in 0..n1 {
        if op.fixed[i] {
            b[i] = fixed_values[i];
        }
    }

    let (x, iterations) = match method {
        BlockMethod::Pcg => {
            let pre = BlockPreconditioner { factors, n1, n2: op.n_micro() };
            let r = pcg(&Masked(op), &pre, &b, None, opts)?;
            (r.x, r.iterations)
        }
        BlockMethod::Direct => (direct_solve(op, factors, &b), 0),
    };

    let mut ax = vec![0.0; n];
    op.apply_masked(&x, &mut ax);
    let bn = super::norm2(&b);
    let res: f64 = ax.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
    let residual = if bn > 0.0 { res / bn } else { res };
    Ok(BlockSolveResult { x, iterations, residual })
}

fn direct_solve(op: &BlockOperator, f: &BlockFactors, b: &[f64]) -> Vec<f64> {
    let (n1, n2) = (op.n_macro(), op.n_micro());
    let nn = n1 * n2;
    let (ra, rest) = b.split_at(n1);
    let (rb, rc) = rest.split_at(nn);

    // a_F from the Schur complement, fixed rows carry their values.
    let zr = contract_micro(rb, &f.z);
    let mut sa: Vec<f64> = ra.to_vec();
    for i in 0..n1 {
        if !op.fixed[i] {
            sa[i] += op.alpha * zr[i];
        }
    }
    let a = f.schur_chol.solve(&sa);

    // b = (M^{-1} ⊗ A_v^{-1}) rb + alpha * a_F ⊗ z
    let mut bsol = f.kron_inverse(&f.v_chol, rb, n1, n2);
    for i in 0..n1 {
        if op.fixed[i] {
            continue;
        }
        for j in 0..n2 {
            bsol[i * n2 + j] += op.alpha * a[i] * f.z[j];
        }
    }
    let csol = f.kron_inverse(&f.w_chol, rc, n1, n2);

    let mut x = a;
    x.extend(bsol);
    x.extend(csol);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cg::cg_solve;

    fn spd(n: usize, seed: f64) -> CsrMatrix {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            d[i * n + i] = 3.0 + (seed * (i + 1) as f64).sin().abs();
            if i + 1 < n {
                let off = 0.5 * (seed + i as f64).cos();
                d[i * n + i + 1] = off;
                d[(i + 1) * n + i] = off;
            }
        }
        CsrMatrix::from_dense(n, n, &d)
    }

    fn dense_kron(a: &CsrMatrix, b: &CsrMatrix) -> CsrMatrix {
        let (n1, n2) = (a.rows(), b.rows());
        let mut t = crate::linalg::TripletBuilder::new(n1 * n2, n1 * n2);
        for i in 0..n1 {
            for (k, av) in a.row(i) {
                for j in 0..n2 {
                    for (l, bv) in b.row(j) {
                        t.push(i * n2 + j, k * n2 + l, av * bv);
                    }
                }
            }
        }
        t.build()
    }

    fn op(alpha: f64, n1: usize, n2: usize, fixed: Vec<bool>) -> BlockOperator {
        BlockOperator {
            m_omega: spd(n1, 0.3),
            a_block: spd(n1, 0.7).scaled(2.0),
            alpha,
            t_y: (0..n2).map(|j| 0.1 + 0.05 * j as f64).collect(),
            micro_v: spd(n2, 1.1),
            micro_w: spd(n2, 1.9),
            fixed,
        }
    }

    #[test]
    fn decoupled_case_matches_independent_solves() {
        let (n1, n2) = (3, 4);
        let o = op(0.0, n1, n2, vec![false; n1]);
        let f = BlockFactors::new(&o).unwrap();
        let rhs: Vec<f64> = (0..o.len()).map(|i| (i as f64 * 0.7).sin()).collect();
        let sol = block_solve(&o, &f, &rhs, &vec![0.0; n1], BlockMethod::Pcg, CgOptions::with_tol(1e-13)).unwrap();

        let xa = cg_solve(&o.a_block, &rhs[..n1], CgOptions::with_tol(1e-14)).unwrap().x;
        let kb = dense_kron(&o.m_omega, &o.micro_v);
        let xb = cg_solve(&kb, &rhs[n1..n1 + n1 * n2], CgOptions::with_tol(1e-14)).unwrap().x;
        let kc = dense_kron(&o.m_omega, &o.micro_w);
        let xc = cg_solve(&kc, &rhs[n1 + n1 * n2..], CgOptions::with_tol(1e-14)).unwrap().x;
        let want: Vec<f64> = xa.into_iter().chain(xb).chain(xc).collect();
        for (u, v) in sol.x.iter().zip(&want) {
            assert!((u - v).abs() < 1e-10, "{u} vs {v}");
        }
    }

    #[test]
    fn scalar_model_matches_closed_form() {
        // S = [[s, -alpha m t, 0], [-alpha m t, m a_v, 0], [0, 0, m a_w]]
        let (m, s, t, av, aw, alpha) = (0.5, 3.0, 0.8, 2.0, 1.5, 1.2);
        let o = BlockOperator {
            m_omega: CsrMatrix::from_dense(1, 1, &[m]),
            a_block: CsrMatrix::from_dense(1, 1, &[s]),
            alpha,
            t_y: vec![t],
            micro_v: CsrMatrix::from_dense(1, 1, &[av]),
            micro_w: CsrMatrix::from_dense(1, 1, &[aw]),
            fixed: vec![false],
        };
        let f = BlockFactors::new(&o).unwrap();
        let rhs = [1.0, 2.0, 3.0];
        // symbolic elimination of the 2x2 (a,b) block
        let k = -alpha * m * t;
        let det = s * m * av - k * k;
        let a = (rhs[0] * m * av - k * rhs[1]) / det;
        let b = (s * rhs[1] - k * rhs[0]) / det;
        let c = rhs[2] / (m * aw);
        for method in [BlockMethod::Pcg, BlockMethod::Direct] {
            let r = block_solve(&o, &f, &rhs, &[0.0], method, CgOptions::with_tol(1e-14)).unwrap();
            assert!((r.x[0] - a).abs() < 1e-13);
            assert!((r.x[1] - b).abs() < 1e-13);
            assert!((r.x[2] - c).abs() < 1e-13);
        }
    }

    #[test]
    fn operator_is_symmetric_and_methods_agree() {
        let (n1, n2) = (4, 3);
        let mut fixed = vec![false; n1];
        fixed[0] = true;
        let o = op(0.4, n1, n2, fixed);
        let f = BlockFactors::new(&o).unwrap();
        let n = o.len();
        let u: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * 0.4 + 0.2).sin()).collect();
        let su = o.apply_full(&u);
        let sv = o.apply_full(&v);
        let lhs: f64 = v.iter().zip(&su).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(&sv).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);

        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64).sin()).collect();
        let fixed_vals = vec![0.25; n1];
        let p = block_solve(&o, &f, &b, &fixed_vals, BlockMethod::Pcg, CgOptions::with_tol(1e-13)).unwrap();
        let d = block_solve(&o, &f, &b, &fixed_vals, BlockMethod::Direct, CgOptions::with_tol(1e-13)).unwrap();
        assert!((p.x[0] - 0.25).abs() < 1e-15);
        assert!(d.residual < 1e-12, "direct residual {}", d.residual);
        for (x, y) in p.x.iter().zip(&d.x) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
