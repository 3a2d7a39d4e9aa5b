use super::quadrature::{q1_grad, q1_shape, tensor_rule};
use crate::geometry::MicroMesh;

/// Bilinear space on the uniform micro mesh; DOFs coincide with mesh nodes.
#[derive(Debug, Clone)]
pub struct MicroSpace {
    mesh: MicroMesh,
}

impl MicroSpace {
    pub fn new(mesh: &MicroMesh) -> Self {
        Self { mesh: mesh.clone() }
    }

    pub fn mesh(&self) -> &MicroMesh {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.num_nodes()
    }

    pub fn cell_size(&self) -> f64 {
        1.0 / self.mesh.n() as f64
    }

    pub fn node(&self, j: usize) -> [f64; 2] {
        self.mesh.node(j)
    }

    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        (0..self.n_dofs()).map(|j| f(self.node(j))).collect()
    }

    /// Cells as `(origin, corner nodes)`.
    pub fn cells(&self) -> impl Iterator<Item = ([f64; 2], [usize; 4])> + '_ {
        let n = self.mesh.n();
        let h = self.cell_size();
        (0..n).flat_map(move |cy| (0..n).map(move |cx| ([cx as f64 * h, cy as f64 * h], self.mesh.cell_nodes(cx, cy))))
    }

    /// Tensor Gauss rule with `n` points per direction on every cell.
    pub fn quadrature(&self, n: usize) -> MicroQuadrature {
        let h = self.cell_size();
        let rule = tensor_rule(n);
        let mut points = Vec::with_capacity(self.mesh.n() * self.mesh.n() * rule.len());
        for (o, nodes) in self.cells() {
            for &(xi, eta, w) in &rule {
                points.push(MicroQuadPoint {
                    y: [o[0] + xi * h, o[1] + eta * h],
                    weight: w * h * h,
                    nodes,
                    shape: q1_shape(xi, eta),
                    grad: q1_grad(xi, eta).map(|[a, b]| [a / h, b / h]),
                });
            }
        }
        MicroQuadrature { points }
    }

    /// Value and gradient of a micro FE function at `y`.
    pub fn evaluate(&self, coeffs: &[f64], y: [f64; 2]) -> (f64, [f64; 2]) {
        let n = self.mesh.n();
        let h = self.cell_size();
        let cx = ((y[0] / h).floor() as usize).min(n - 1);
        let cy = ((y[1] / h).floor() as usize).min(n - 1);
        let (xi, eta) = (y[0] / h - cx as f64, y[1] / h - cy as f64);
        let nodes = self.mesh.cell_nodes(cx, cy);
        let s = q1_shape(xi, eta);
        let g = q1_grad(xi, eta);
        let mut v = 0.0;
        let mut grad = [0.0; 2];
        for k in 0..4 {
            let c = coeffs[nodes[k]];
            v += s[k] * c;
            grad[0] += g[k][0] * c / h;
            grad[1] += g[k][1] * c / h;
        }
        (v, grad)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MicroQuadPoint {
    pub y: [f64; 2],
    pub weight: f64,
    pub nodes: [usize; 4],
    pub shape: [f64; 4],
    pub grad: [[f64; 2]; 4],
}

#[derive(Debug, Clone)]
pub struct MicroQuadrature {
    pub points: Vec<MicroQuadPoint>,
}

impl MicroQuadrature {
    /// Load vector `int f psi_j + g . grad psi_j`.
    pub fn load(&self, n_dofs: usize, f: impl Fn(&MicroQuadPoint) -> (f64, [f64; 2])) -> Vec<f64> {
        let mut out = vec![0.0; n_dofs];
        for qp in &self.points {
            let (fv, gv) = f(qp);
            for k in 0..4 {
                out[qp.nodes[k]] += qp.weight * (fv * qp.shape[k] + gv[0] * qp.grad[k][0] + gv[1] * qp.grad[k][1]);
            }
        }
        out
    }
}

impl MicroSpace {
    /// `int_side f psi_j dsigma` with an `n`-point Gauss rule per edge.
    pub fn side_load(&self, side: crate::geometry::Side, n: usize, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs()];
        let h = self.cell_size();
        let rule = super::quadrature::gauss_legendre(n);
        for [a, b] in self.mesh.side_edges(side) {
            let (pa, pb) = (self.node(a), self.node(b));
            for &(s, w) in &rule {
                let y = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                let fv = f(y) * w * h;
                out[a] += (1.0 - s) * fv;
                out[b] += s * fv;
            }
        }
        out
    }
}
