use std::collections::{BTreeSet, HashMap};

use super::quadrature::{q1_grad, q1_shape, tensor_rule};
use super::FemError;
use crate::geometry::{DyadicSquare, MacroPartition, COORD_BITS};
use crate::linalg::{CsrMatrix, TripletBuilder};

/// Lattice coordinate of a node, in units of `2^-COORD_BITS`.
pub type LatticePoint = [u64; 2];

const LATTICE_MAX: u64 = 1 << COORD_BITS;

/// A global DOF with its weight in a local corner value.
pub type Weighted = (usize, f64);

/// Bilinear conforming space on a 1-irregular dyadic partition.
///
/// Free DOFs are the partition corners that are not hanging; a hanging node
/// sits at the midpoint of a coarse edge and takes the average of the two edge
/// endpoints, expanded recursively until only free DOFs remain.
#[derive(Debug, Clone)]
pub struct MacroSpace {
    partition: MacroPartition,
    nodes: Vec<LatticePoint>,
    index: HashMap<LatticePoint, usize>,
    boundary: Vec<bool>,
    hanging: Vec<(LatticePoint, Vec<Weighted>)>,
    elements: Vec<DyadicSquare>,
    element_dofs: Vec<[Vec<Weighted>; 4]>,
}

pub fn lattice_to_point(p: LatticePoint) -> [f64; 2] {
    let s = LATTICE_MAX as f64;
    [p[0] as f64 / s, p[1] as f64 / s]
}

fn on_boundary(p: LatticePoint) -> bool {
    p[0] == 0 || p[1] == 0 || p[0] == LATTICE_MAX || p[1] == LATTICE_MAX
}

impl MacroSpace {
    pub fn new(partition: &MacroPartition) -> Result<Self, FemError> {
        if !partition.is_one_irregular() {
            return Err(FemError::NotOneIrregular);
        }
        let corners: BTreeSet<LatticePoint> = partition.squares().flat_map(|q| q.lattice_corners()).collect();

        // hanging node -> the two endpoints of the coarse edge it bisects
        let mut parents: HashMap<LatticePoint, [LatticePoint; 2]> = HashMap::new();
        for q in partition.squares() {
            let c = q.lattice_corners();
            for k in 0..4 {
                let (a, b) = (c[k], c[(k + 1) % 4]);
                let mid = [(a[0] + b[0]) / 2, (a[1] + b[1]) / 2];
                if corners.contains(&mid) {
                    parents.insert(mid, [a, b]);
                }
            }
        }

        let mut free: Vec<LatticePoint> = corners.iter().filter(|p| !parents.contains_key(*p)).copied().collect();
        free.sort_by_key(|p| (p[1], p[0]));
        let index: HashMap<LatticePoint, usize> = free.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let boundary = free.iter().map(|p| on_boundary(*p)).collect();

        let mut memo: HashMap<LatticePoint, Vec<Weighted>> = HashMap::new();
        let mut expand_cache = |p: LatticePoint| expand(p, &index, &parents, &mut memo);
        let mut hanging: Vec<(LatticePoint, Vec<Weighted>)> = Vec::new();
        let mut hang_pts: Vec<LatticePoint> = parents.keys().copied().collect();
        hang_pts.sort_by_key(|p| (p[1], p[0]));
        for p in hang_pts {
            let w = expand_cache(p)?;
            hanging.push((p, w));
        }

        let elements: Vec<DyadicSquare> = partition.squares().copied().collect();
        let mut element_dofs = Vec::with_capacity(elements.len());
        for q in &elements {
            let c = q.lattice_corners();
            element_dofs.push([expand_cache(c[0])?, expand_cache(c[1])?, expand_cache(c[2])?, expand_cache(c[3])?]);
        }

        Ok(Self { partition: partition.clone(), nodes: free, index, boundary, hanging, elements, element_dofs })
    }

    pub fn partition(&self) -> &MacroPartition {
        &self.partition
    }

    /// Number of free DOFs (boundary nodes included).
    pub fn n_dofs(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        lattice_to_point(self.nodes[i])
    }

    pub fn lattice_node(&self, i: usize) -> LatticePoint {
        self.nodes[i]
    }

    pub fn dof_of(&self, p: LatticePoint) -> Option<usize> {
        self.index.get(&p).copied()
    }

    /// Dirichlet flags on `∂Ω`.
    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn n_interior(&self) -> usize {
        self.boundary.iter().filter(|b| !**b).count()
    }

    /// Hanging nodes with their expanded constraint rows.
    pub fn hanging_nodes(&self) -> &[(LatticePoint, Vec<Weighted>)] {
        &self.hanging
    }

    pub fn elements(&self) -> &[DyadicSquare] {
        &self.elements
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Constraint rows of the four corners of element `e`.
    pub fn element_dofs(&self, e: usize) -> &[Vec<Weighted>; 4] {
        &self.element_dofs[e]
    }

    /// Local corner values of a coefficient vector on element `e`.
    pub fn gather(&self, e: usize, coeffs: &[f64]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (k, row) in self.element_dofs[e].iter().enumerate() {
            out[k] = row.iter().map(|(d, w)| w * coeffs[*d]).sum();
        }
        out
    }

    /// Adds local corner contributions into a global load vector.
    pub fn scatter(&self, e: usize, local: [f64; 4], out: &mut [f64]) {
        for (k, row) in self.element_dofs[e].iter().enumerate() {
            for (d, w) in row {
                out[*d] += w * local[k];
            }
        }
    }

    /// Assembles `sum_e P_e^T A_e P_e` for element matrices produced by `local`.
    pub fn assemble(&self, local: impl Fn(&DyadicSquare) -> [[f64; 4]; 4]) -> CsrMatrix {
        let n = self.n_dofs();
        let mut t = TripletBuilder::with_capacity(n, n, 16 * self.elements.len());
        for (e, q) in self.elements.iter().enumerate() {
            let a = local(q);
            let dofs = &self.element_dofs[e];
            for (ka, ra) in dofs.iter().enumerate() {
                for (kb, rb) in dofs.iter().enumerate() {
                    let v = a[ka][kb];
                    if v == 0.0 {
                        continue;
                    }
                    for (da, wa) in ra {
                        for (db, wb) in rb {
                            t.push(*da, *db, wa * wb * v);
                        }
                    }
                }
            }
        }
        t.build()
    }

    /// Nodal interpolant.
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        (0..self.n_dofs()).map(|i| f(self.node(i))).collect()
    }

    /// The element containing a lattice point (any of them on shared edges).
    pub fn locate_lattice(&self, p: LatticePoint) -> Option<usize> {
        let lo = self.partition.min_level();
        let hi = self.partition.max_level();
        for level in lo..=hi {
            let cells = 1u64 << level;
            let shift = COORD_BITS - level;
            let ix = (p[0] >> shift).min(cells - 1) as u32;
            let iy = (p[1] >> shift).min(cells - 1) as u32;
            let q = DyadicSquare { level, ix, iy };
            if self.partition.contains(&q) {
                return self.elements.binary_search(&q).ok();
            }
        }
        None
    }

    pub fn locate(&self, x: [f64; 2]) -> Option<usize> {
        if !(0.0..=1.0).contains(&x[0]) || !(0.0..=1.0).contains(&x[1]) {
            return None;
        }
        let s = LATTICE_MAX as f64;
        self.locate_lattice([(x[0] * s).round() as u64, (x[1] * s).round() as u64])
    }

    /// Value and gradient of the FE function with coefficients `coeffs` at `x`.
    pub fn evaluate(&self, coeffs: &[f64], x: [f64; 2]) -> Option<(f64, [f64; 2])> {
        let e = self.locate(x)?;
        let q = &self.elements[e];
        let [x0, y0] = q.origin();
        let h = q.side();
        let (xi, eta) = ((x[0] - x0) / h, (x[1] - y0) / h);
        let loc = self.gather(e, coeffs);
        let n = q1_shape(xi, eta);
        let g = q1_grad(xi, eta);
        let mut v = 0.0;
        let mut grad = [0.0; 2];
        for k in 0..4 {
            v += n[k] * loc[k];
            grad[0] += g[k][0] * loc[k] / h;
            grad[1] += g[k][1] * loc[k] / h;
        }
        Some((v, grad))
    }

    /// Prolongation `P` with `u_fine = P u_coarse` for a nested finer space.
    pub fn prolongation_to(&self, fine: &MacroSpace) -> Result<CsrMatrix, FemError> {
        if !self.partition.is_refined_by(&fine.partition) {
            return Err(FemError::NotNested);
        }
        let mut t = TripletBuilder::new(fine.n_dofs(), self.n_dofs());
        for (i, p) in fine.nodes.iter().enumerate() {
            let e = self.locate_lattice(*p).ok_or(FemError::NotNested)?;
            let q = &self.elements[e];
            let [ox, oy] = q.lattice_origin();
            let s = q.lattice_side() as f64;
            let (xi, eta) = ((p[0] - ox) as f64 / s, (p[1] - oy) as f64 / s);
            let n = q1_shape(xi, eta);
            for (k, row) in self.element_dofs[e].iter().enumerate() {
                if n[k] == 0.0 {
                    continue;
                }
                for (d, w) in row {
                    t.push(i, *d, n[k] * w);
                }
            }
        }
        Ok(t.build())
    }

    /// Composite tensor Gauss rule: every element split into `2^s x 2^s` cells
    /// so that cells are no larger than level `min_level`, `n` points per direction.
    pub fn quadrature(&self, min_level: u8, n: usize) -> MacroQuadrature {
        let rule = tensor_rule(n);
        let mut points = Vec::new();
        for (e, q) in self.elements.iter().enumerate() {
            let sub = 1usize << min_level.saturating_sub(q.level);
            let [x0, y0] = q.origin();
            let h = q.side();
            let hs = 1.0 / sub as f64;
            for sy in 0..sub {
                for sx in 0..sub {
                    for &(a, b, w) in &rule {
                        let xi = (sx as f64 + a) * hs;
                        let eta = (sy as f64 + b) * hs;
                        let g = q1_grad(xi, eta);
                        points.push(MacroQuadPoint {
                            x: [x0 + xi * h, y0 + eta * h],
                            weight: w * hs * hs * h * h,
                            element: e,
                            shape: q1_shape(xi, eta),
                            grad: g.map(|[gx, gy]| [gx / h, gy / h]),
                        });
                    }
                }
            }
        }
        MacroQuadrature { points }
    }
}

fn expand(
    p: LatticePoint,
    index: &HashMap<LatticePoint, usize>,
    parents: &HashMap<LatticePoint, [LatticePoint; 2]>,
    memo: &mut HashMap<LatticePoint, Vec<Weighted>>,
) -> Result<Vec<Weighted>, FemError> {
    if let Some(&i) = index.get(&p) {
        return Ok(vec![(i, 1.0)]);
    }
    if let Some(w) = memo.get(&p) {
        return Ok(w.clone());
    }
    let [a, b] = *parents.get(&p).ok_or(FemError::NotOneIrregular)?;
    let mut acc: Vec<Weighted> = Vec::new();
    for end in [a, b] {
        for (d, w) in expand(end, index, parents, memo)? {
            match acc.iter_mut().find(|(k, _)| *k == d) {
                Some(slot) => slot.1 += 0.5 * w,
                None => acc.push((d, 0.5 * w)),
            }
        }
    }
    acc.sort_by_key(|(d, _)| *d);
    memo.insert(p, acc.clone());
    Ok(acc)
}

#[derive(Debug, Clone, Copy)]
pub struct MacroQuadPoint {
    pub x: [f64; 2],
    pub weight: f64,
    pub element: usize,
    /// Local corner shape values.
    pub shape: [f64; 4],
    /// Physical gradients of the local corner shapes.
    pub grad: [[f64; 2]; 4],
}

#[derive(Debug, Clone)]
pub struct MacroQuadrature {
    pub points: Vec<MacroQuadPoint>,
}

impl MacroQuadrature {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// FE value and gradient at every point.
    pub fn evaluate(&self, space: &MacroSpace, coeffs: &[f64]) -> Vec<(f64, [f64; 2])> {
        self.points
            .iter()
            .map(|qp| {
                let loc = space.gather(qp.element, coeffs);
                let mut v = 0.0;
                let mut g = [0.0; 2];
                for k in 0..4 {
                    v += qp.shape[k] * loc[k];
                    g[0] += qp.grad[k][0] * loc[k];
                    g[1] += qp.grad[k][1] * loc[k];
                }
                (v, g)
            })
            .collect()
    }

    /// Load vector `int f phi_i + g . grad phi_i` from point values of `f` and `g`.
    pub fn load(&self, space: &MacroSpace, f: impl Fn(usize, &MacroQuadPoint) -> (f64, [f64; 2])) -> Vec<f64> {
        let mut out = vec![0.0; space.n_dofs()];
        for (k, qp) in self.points.iter().enumerate() {
            let (fv, gv) = f(k, qp);
            let mut loc = [0.0; 4];
            for c in 0..4 {
                loc[c] = qp.weight * (fv * qp.shape[c] + gv[0] * qp.grad[c][0] + gv[1] * qp.grad[c][1]);
            }
            space.scatter(qp.element, loc, &mut out);
        }
        out
    }
}
