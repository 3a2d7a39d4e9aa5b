use crate::fem::{FeSystem, MacroQuadrature, MacroSpace, MicroQuadrature, MicroSpace};
use crate::geometry::{MacroPartition, MicroMesh};

use super::SolverError;

/// Spaces, assembled operators and the cell quadratures used for the reaction term.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub space: MacroSpace,
    pub micro: MicroSpace,
    pub sys: FeSystem,
    pub macro_quad: MacroQuadrature,
    pub micro_quad: MicroQuadrature,
}

impl Discretization {
    pub fn new(partition: &MacroPartition, mesh: &MicroMesh) -> Result<Self, SolverError> {
        let space = MacroSpace::new(partition)?;
        let micro = MicroSpace::new(mesh);
        let sys = FeSystem::assemble(&space, &micro);
        let macro_quad = space.quadrature(0, 2);
        let micro_quad = micro.quadrature(2);
        Ok(Self { space, micro, sys, macro_quad, micro_quad })
    }

    pub fn n_macro(&self) -> usize {
        self.space.n_dofs()
    }

    pub fn n_micro(&self) -> usize {
        self.micro.n_dofs()
    }

    pub fn h_omega(&self) -> f64 {
        self.space.partition().h()
    }

    pub fn h_y(&self) -> f64 {
        self.micro.mesh().h()
    }

    /// Tensor coefficients `chi(x_i, y_j)` of a two-scale function.
    pub fn interpolate_two_scale(&self, f: impl Fn([f64; 2], [f64; 2]) -> f64) -> Vec<f64> {
        let (n1, n2) = (self.n_macro(), self.n_micro());
        let mut out = Vec::with_capacity(n1 * n2);
        for i in 0..n1 {
            let x = self.space.node(i);
            for j in 0..n2 {
                out.push(f(x, self.micro.node(j)));
            }
        }
        out
    }
}
