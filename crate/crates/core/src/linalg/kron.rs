use super::{CsrMatrix, LinalgError};

/// `A ⊗ B` acting on vectors laid out micro-fastest: entry `(i, j)` of the
/// coefficient array (macro index `i`, micro index `j`) lives at `i * n_b + j`.
///
/// Factors may be rectangular; the operator maps length `A.cols * B.cols` to
/// length `A.rows * B.rows`.
#[derive(Debug, Clone)]
pub struct KroneckerOperator {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
}

impl KroneckerOperator {
    pub fn new(a: CsrMatrix, b: CsrMatrix) -> Self {
        Self { a, b }
    }

    pub fn input_len(&self) -> usize {
        self.a.cols() * self.b.cols()
    }

    pub fn output_len(&self) -> usize {
        self.a.rows() * self.b.rows()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.input_len() {
            return Err(LinalgError::DimensionMismatch { expected: self.input_len(), found: x.len() });
        }
        Ok(kron_apply(&self.a, &self.b, x))
    }
}

/// `vec(B X A^T)` where `X` holds the micro-fastest blocks of `x`.
pub fn kron_apply(a: &CsrMatrix, b: &CsrMatrix, x: &[f64]) -> Vec<f64> {
    let (nb_in, nb_out) = (b.cols(), b.rows());
    debug_assert_eq!(x.len(), a.cols() * nb_in);
    // Z_k = B x_k for every macro column k
    let mut z = vec![0.0; a.cols() * nb_out];
    for k in 0..a.cols() {
        b.matvec_into(&x[k * nb_in..(k + 1) * nb_in], &mut z[k * nb_out..(k + 1) * nb_out]);
    }
    let mut y = vec![0.0; a.rows() * nb_out];
    for i in 0..a.rows() {
        let yi = &mut y[i * nb_out..(i + 1) * nb_out];
        for (k, aik) in a.row(i) {
            let zk = &z[k * nb_out..(k + 1) * nb_out];
            for (yv, zv) in yi.iter_mut().zip(zk) {
                *yv += aik * zv;
            }
        }
    }
    y
}

/// `(I ⊗ B) x`: apply `B` to each micro block independently.
pub fn apply_micro(b: &CsrMatrix, x: &[f64]) -> Vec<f64> {
    let (nin, nout) = (b.cols(), b.rows());
    let blocks = x.len() / nin;
    let mut y = vec![0.0; blocks * nout];
    for k in 0..blocks {
        b.matvec_into(&x[k * nin..(k + 1) * nin], &mut y[k * nout..(k + 1) * nout]);
    }
    y
}

/// `(A ⊗ I) x`: combine micro blocks with the macro factor.
pub fn apply_macro(a: &CsrMatrix, x: &[f64], n_micro: usize) -> Vec<f64> {
    let mut y = vec![0.0; a.rows() * n_micro];
    for i in 0..a.rows() {
        let yi = &mut y[i * n_micro..(i + 1) * n_micro];
        for (k, aik) in a.row(i) {
            for (yv, xv) in yi.iter_mut().zip(&x[k * n_micro..(k + 1) * n_micro]) {
                *yv += aik * xv;
            }
        }
    }
    y
}

/// Outer product `u ⊗ v` in the micro-fastest layout.
pub fn outer(u: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(u.len() * v.len());
    for &ui in u {
        out.extend(v.iter().map(|vj| ui * vj));
    }
    out
}

/// Contracts the micro index against `v`: `out_i = sum_j x_(i,j) v_j`.
pub fn contract_micro(x: &[f64], v: &[f64]) -> Vec<f64> {
    x.chunks_exact(v.len()).map(|blk| blk.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities_and_scalars() {
        let k = KroneckerOperator::new(CsrMatrix::identity(2), CsrMatrix::identity(3));
        let x: Vec<f64> = (0..6).map(|i| i as f64).collect();
        assert_eq!(k.apply(&x).unwrap(), x);

        let k = KroneckerOperator::new(CsrMatrix::from_dense(1, 1, &[2.0]), CsrMatrix::from_dense(1, 1, &[3.0]));
        assert_eq!(k.apply(&[5.0]).unwrap(), vec![30.0]);
        assert!(k.apply(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn outer_and_contract() {
        let o = outer(&[1.0, 2.0], &[3.0, 4.0, 5.0]);
        assert_eq!(o, vec![3.0, 4.0, 5.0, 6.0, 8.0, 10.0]);
        assert_eq!(contract_micro(&o, &[1.0, 0.0, 1.0]), vec![8.0, 16.0]);
    }
}
