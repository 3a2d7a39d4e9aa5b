use super::macro_space::MacroSpace;
use super::micro_space::MicroSpace;
use super::quadrature::{edge_mass, q1_element_matrices};
use super::FemError;
use crate::geometry::Side;
use crate::linalg::{dot, CsrMatrix, TripletBuilder};

/// Every matrix of the two-scale Galerkin system.
#[derive(Debug, Clone)]
pub struct FeSystem {
    pub m_omega: CsrMatrix,
    pub k_omega: CsrMatrix,
    pub m_y: CsrMatrix,
    pub k_y: CsrMatrix,
    /// Edge mass on the reactive interface.
    pub b_y: CsrMatrix,
    /// Edge mass on all of `∂Y`.
    pub b_boundary: CsrMatrix,
    /// `int_{Γ^R} psi_j`.
    pub t_y: Vec<f64>,
    /// Measure of the reactive interface.
    pub s_r: f64,
}

impl FeSystem {
    pub fn assemble(space: &MacroSpace, micro: &MicroSpace) -> Self {
        let m_omega = space.assemble(|q| q1_element_matrices(q.side()).0);
        let k_omega = space.assemble(|q| q1_element_matrices(q.side()).1);

        let n2 = micro.n_dofs();
        let (me, ke) = q1_element_matrices(micro.cell_size());
        let mut tm = TripletBuilder::new(n2, n2);
        let mut tk = TripletBuilder::new(n2, n2);
        for (_, nodes) in micro.cells() {
            for a in 0..4 {
                for b in 0..4 {
                    tm.push(nodes[a], nodes[b], me[a][b]);
                    tk.push(nodes[a], nodes[b], ke[a][b]);
                }
            }
        }

        let h = micro.cell_size();
        let em = edge_mass(h);
        let mesh = micro.mesh();
        let mut tr = TripletBuilder::new(n2, n2);
        let mut tb = TripletBuilder::new(n2, n2);
        let mut t_y = vec![0.0; n2];
        for side in Side::ALL {
            let reactive = mesh.is_reactive(side);
            for e in mesh.side_edges(side) {
                for a in 0..2 {
                    for b in 0..2 {
                        tb.push(e[a], e[b], em[a][b]);
                        if reactive {
                            tr.push(e[a], e[b], em[a][b]);
                        }
                    }
                    if reactive {
                        t_y[e[a]] += 0.5 * h;
                    }
                }
            }
        }

        Self {
            m_omega,
            k_omega,
            m_y: tm.build(),
            k_y: tk.build(),
            b_y: tr.build(),
            b_boundary: tb.build(),
            t_y,
            s_r: mesh.gamma_r_measure(),
        }
    }

    pub fn n_macro(&self) -> usize {
        self.m_omega.rows()
    }

    pub fn n_micro(&self) -> usize {
        self.m_y.rows()
    }

    /// `u^T (M_Ω + K_Ω) v`.
    pub fn macro_h1_inner(&self, u: &[f64], v: &[f64]) -> Result<f64, FemError> {
        check_len(self.n_macro(), u, v)?;
        Ok(self.m_omega.bilinear(u, v) + self.k_omega.bilinear(u, v))
    }

    /// `u^T (M_Y + K_Y) v` on a single fibre.
    pub fn micro_h1_inner(&self, u: &[f64], v: &[f64]) -> Result<f64, FemError> {
        check_len(self.n_micro(), u, v)?;
        Ok(self.m_y.bilinear(u, v) + self.k_y.bilinear(u, v))
    }

    /// `L^2(Ω, H^1(Y))` inner product of two tensor coefficient vectors.
    pub fn two_scale_inner(&self, u: &[f64], v: &[f64]) -> Result<f64, FemError> {
        check_len(self.n_macro() * self.n_micro(), u, v)?;
        let a = self.m_y.linear_combination(1.0, &self.k_y, 1.0);
        let kv = crate::linalg::kron_apply(&self.m_omega, &a, v);
        Ok(dot(u, &kv))
    }
}

fn check_len(n: usize, u: &[f64], v: &[f64]) -> Result<(), FemError> {
    for x in [u, v] {
        if x.len() != n {
            return Err(FemError::DimensionMismatch { expected: n, found: x.len() });
        }
    }
    Ok(())
}

/// Convenience: `M + K` on the macro space.
pub fn macro_h1_matrix(sys: &FeSystem) -> CsrMatrix {
    sys.m_omega.linear_combination(1.0, &sys.k_omega, 1.0)
}

/// Convenience: `M_Y + K_Y`.
pub fn micro_h1_matrix(sys: &FeSystem) -> CsrMatrix {
    sys.m_y.linear_combination(1.0, &sys.k_y, 1.0)
}
