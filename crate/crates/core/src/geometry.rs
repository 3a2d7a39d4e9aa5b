//! Dyadic quadtree partitions of the unit square and the uniform micro-cell mesh.
//!
//! Node positions are tracked on an integer lattice of resolution `2^COORD_BITS`
//! so that refinement bookkeeping (areas, adjacency, hanging nodes) is exact.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Resolution of the integer node lattice. Every square up to this level has
/// exact integer corner coordinates.
pub const COORD_BITS: u8 = 30;

/// Default cap on quadtree depth.
pub const DEFAULT_MAX_DEPTH: u8 = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("refining {square} would exceed the depth limit {max_depth}")]
    DepthLimit { square: DyadicSquare, max_depth: u8 },
    #[error("marked square {0} is not part of the partition")]
    InvalidMarking(DyadicSquare),
    #[error("marking set is empty")]
    EmptyMarking,
    #[error("square {0} is not part of the partition")]
    InvalidQuery(DyadicSquare),
    #[error("invalid dyadic square (level {level}, ix {ix}, iy {iy})")]
    InvalidSquare { level: u8, ix: u32, iy: u32 },
    #[error("micro mesh needs n >= 1 and a nonempty reaction interface")]
    InvalidMicroMesh,
    #[error("malformed dump: {0}")]
    Parse(String),
}

/// Axis-aligned square `[ix, ix+1] x [iy, iy+1]` scaled by `2^-level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicSquare {
    pub level: u8,
    pub ix: u32,
    pub iy: u32,
}

impl fmt::Display for DyadicSquare {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.level, self.ix, self.iy)
    }
}

impl DyadicSquare {
    pub const ROOT: DyadicSquare = DyadicSquare { level: 0, ix: 0, iy: 0 };

    pub fn new(level: u8, ix: u32, iy: u32) -> Result<Self, GeometryError> {
        if level > COORD_BITS || (ix as u64) >= (1u64 << level) || (iy as u64) >= (1u64 << level) {
            return Err(GeometryError::InvalidSquare { level, ix, iy });
        }
        Ok(Self { level, ix, iy })
    }

    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn diameter(&self) -> f64 {
        self.side() * std::f64::consts::SQRT_2
    }

    pub fn area(&self) -> f64 {
        self.side() * self.side()
    }

    /// Lower-left corner in physical coordinates.
    pub fn origin(&self) -> [f64; 2] {
        let h = self.side();
        [self.ix as f64 * h, self.iy as f64 * h]
    }

    pub fn center(&self) -> [f64; 2] {
        let [x, y] = self.origin();
        let h = 0.5 * self.side();
        [x + h, y + h]
    }

    /// Side length measured in lattice units.
    pub fn lattice_side(&self) -> u64 {
        1u64 << (COORD_BITS - self.level)
    }

    /// Lattice coordinates of the lower-left corner.
    pub fn lattice_origin(&self) -> [u64; 2] {
        let s = self.lattice_side();
        [self.ix as u64 * s, self.iy as u64 * s]
    }

    /// Corners in counter-clockwise order starting at the lower-left one.
    pub fn lattice_corners(&self) -> [[u64; 2]; 4] {
        let [x, y] = self.lattice_origin();
        let s = self.lattice_side();
        [[x, y], [x + s, y], [x + s, y + s], [x, y + s]]
    }

    /// The four half-size squares, ordered `(0,0), (1,0), (0,1), (1,1)`.
    pub fn children(&self, max_depth: u8) -> Result<[DyadicSquare; 4], GeometryError> {
        if self.level >= max_depth.min(COORD_BITS) {
            return Err(GeometryError::DepthLimit { square: *self, max_depth });
        }
        let l = self.level + 1;
        let (x, y) = (2 * self.ix, 2 * self.iy);
        Ok([
            DyadicSquare { level: l, ix: x, iy: y },
            DyadicSquare { level: l, ix: x + 1, iy: y },
            DyadicSquare { level: l, ix: x, iy: y + 1 },
            DyadicSquare { level: l, ix: x + 1, iy: y + 1 },
        ])
    }

    pub fn parent(&self) -> Option<DyadicSquare> {
        (self.level > 0).then(|| DyadicSquare { level: self.level - 1, ix: self.ix / 2, iy: self.iy / 2 })
    }

    /// Ancestor at a coarser (or equal) level.
    pub fn ancestor(&self, level: u8) -> DyadicSquare {
        debug_assert!(level <= self.level);
        let shift = self.level - level;
        DyadicSquare { level, ix: self.ix >> shift, iy: self.iy >> shift }
    }

    pub fn contains_point(&self, p: [f64; 2]) -> bool {
        let [x0, y0] = self.origin();
        let h = self.side();
        p[0] >= x0 && p[0] <= x0 + h && p[1] >= y0 && p[1] <= y0 + h
    }

    /// Same-level square across the given side, if it lies inside the unit square.
    pub fn across(&self, side: Side) -> Option<DyadicSquare> {
        let n = 1u64 << self.level;
        let (ix, iy) = (self.ix as i64, self.iy as i64);
        let (jx, jy) = match side {
            Side::Bottom => (ix, iy - 1),
            Side::Right => (ix + 1, iy),
            Side::Top => (ix, iy + 1),
            Side::Left => (ix - 1, iy),
        };
        if jx < 0 || jy < 0 || jx as u64 >= n || jy as u64 >= n {
            return None;
        }
        Some(DyadicSquare { level: self.level, ix: jx as u32, iy: jy as u32 })
    }

    /// Length (in lattice units) of the common boundary segment, zero if the
    /// squares only touch at a corner or not at all.
    pub fn shared_edge_length(&self, other: &DyadicSquare) -> u64 {
        let [ax, ay] = self.lattice_origin();
        let [bx, by] = other.lattice_origin();
        let (sa, sb) = (self.lattice_side(), other.lattice_side());
        let overlap = |a0: u64, a1: u64, b0: u64, b1: u64| a1.min(b1).saturating_sub(a0.max(b0));
        if ax + sa == bx || bx + sb == ax {
            overlap(ay, ay + sa, by, by + sb)
        } else if ay + sa == by || by + sb == ay {
            overlap(ax, ax + sa, bx, bx + sb)
        } else {
            0
        }
    }
}

/// The four sides of a square, used both for macro adjacency and for tagging
/// boundary edges of the micro cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    pub fn name(&self) -> &'static str {
        match self {
            Side::Bottom => "bottom",
            Side::Right => "right",
            Side::Top => "top",
            Side::Left => "left",
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        match s.trim() {
            "bottom" => Some(Side::Bottom),
            "right" => Some(Side::Right),
            "top" => Some(Side::Top),
            "left" => Some(Side::Left),
            _ => None,
        }
    }

    /// Outward unit normal of the unit square on this side.
    pub fn normal(&self) -> [f64; 2] {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }
}

/// Nonoverlapping cover of `[0,1]^2` by dyadic squares.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroPartition {
    squares: BTreeSet<DyadicSquare>,
    generation: u32,
    max_depth: u8,
}

/// Result of one refinement round.
#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub partition: MacroPartition,
    /// Squares split because they were marked.
    pub marked: Vec<DyadicSquare>,
    /// Squares split only to restore 1-irregularity.
    pub closure: Vec<DyadicSquare>,
}

impl MacroPartition {
    /// The trivial partition `{[0,1]^2}`.
    pub fn unit() -> Self {
        Self::from_squares([DyadicSquare::ROOT], DEFAULT_MAX_DEPTH).expect("root is a valid partition")
    }

    /// Uniform partition into `4^level` squares.
    pub fn uniform(level: u8) -> Self {
        let n = 1u32 << level;
        let squares = (0..n).flat_map(|iy| (0..n).map(move |ix| DyadicSquare { level, ix, iy }));
        Self {
            squares: squares.collect(),
            generation: 0,
            max_depth: DEFAULT_MAX_DEPTH.max(level),
        }
    }

    /// Builds a partition from an explicit square list; fails unless the squares
    /// tile the unit square without overlap.
    pub fn from_squares(
        squares: impl IntoIterator<Item = DyadicSquare>,
        max_depth: u8,
    ) -> Result<Self, GeometryError> {
        let squares: BTreeSet<_> = squares.into_iter().collect();
        let p = Self { squares, generation: 0, max_depth };
        p.validate_tiling()?;
        Ok(p)
    }

    pub fn with_max_depth(mut self, max_depth: u8) -> Self {
        self.max_depth = max_depth.min(COORD_BITS);
        self
    }

    fn validate_tiling(&self) -> Result<(), GeometryError> {
        if !self.area_is_one() {
            return Err(GeometryError::Parse("squares do not cover the unit square".into()));
        }
        // Equal total area plus no ancestor/descendant pairs means no overlap.
        for q in &self.squares {
            let mut a = q.parent();
            while let Some(anc) = a {
                if self.squares.contains(&anc) {
                    return Err(GeometryError::Parse(format!("{q} overlaps {anc}")));
                }
                a = anc.parent();
            }
        }
        Ok(())
    }

    pub fn squares(&self) -> impl Iterator<Item = &DyadicSquare> {
        self.squares.iter()
    }

    pub fn len(&self) -> usize {
        self.squares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.squares.is_empty()
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn max_depth(&self) -> u8 {
        self.max_depth
    }

    pub fn contains(&self, q: &DyadicSquare) -> bool {
        self.squares.contains(q)
    }

    pub fn max_level(&self) -> u8 {
        self.squares.iter().map(|q| q.level).max().unwrap_or(0)
    }

    pub fn min_level(&self) -> u8 {
        self.squares.iter().map(|q| q.level).min().unwrap_or(0)
    }

    /// Exact area check in lattice units.
    pub fn area_is_one(&self) -> bool {
        let total: u128 = self.squares.iter().map(|q| 1u128 << (2 * (COORD_BITS - q.level) as u32)).sum();
        total == 1u128 << (2 * COORD_BITS as u32)
    }

    /// Largest square diameter.
    pub fn h(&self) -> f64 {
        self.squares.iter().map(|q| q.diameter()).fold(0.0, f64::max)
    }

    /// Square of the partition whose ancestor chain contains `q` (that is, the
    /// partition square covering `q`), if `q` is at least as fine as it.
    fn covering(&self, q: &DyadicSquare) -> Option<DyadicSquare> {
        (0..=q.level).rev().map(|l| q.ancestor(l)).find(|a| self.squares.contains(a))
    }

    /// Square containing `p`. Points on shared edges resolve to one of the
    /// adjacent squares.
    pub fn locate(&self, p: [f64; 2]) -> Option<DyadicSquare> {
        if !(0.0..=1.0).contains(&p[0]) || !(0.0..=1.0).contains(&p[1]) {
            return None;
        }
        let top = self.max_level();
        let n = (1u64 << top) as f64;
        let clamp = |v: f64| ((v * n).floor() as i64).clamp(0, (1i64 << top) - 1) as u32;
        let fine = DyadicSquare { level: top, ix: clamp(p[0]), iy: clamp(p[1]) };
        self.covering(&fine)
    }

    /// All partition squares sharing an edge segment of positive length with `q`.
    pub fn neighbors(&self, q: &DyadicSquare) -> Result<Vec<DyadicSquare>, GeometryError> {
        if !self.contains(q) {
            return Err(GeometryError::InvalidQuery(*q));
        }
        let mut out = BTreeSet::new();
        for side in Side::ALL {
            let Some(adj) = q.across(side) else { continue };
            if let Some(c) = self.covering(&adj) {
                out.insert(c);
                continue;
            }
            // Finer neighbours: descend into `adj` keeping children on the shared side.
            let mut stack = vec![adj];
            while let Some(s) = stack.pop() {
                if self.squares.contains(&s) {
                    out.insert(s);
                    continue;
                }
                if s.level >= COORD_BITS {
                    continue;
                }
                let kids = s.children(COORD_BITS).expect("level below lattice resolution");
                let facing: [usize; 2] = match side {
                    Side::Bottom => [2, 3],
                    Side::Top => [0, 1],
                    Side::Left => [1, 3],
                    Side::Right => [0, 2],
                };
                stack.extend(facing.iter().map(|&i| kids[i]));
            }
        }
        Ok(out.into_iter().collect())
    }

    /// True if edge-adjacent squares differ by at most one level.
    pub fn is_one_irregular(&self) -> bool {
        self.squares.iter().all(|q| {
            self.neighbors(q)
                .map(|ns| ns.iter().all(|n| n.level.abs_diff(q.level) <= 1))
                .unwrap_or(false)
        })
    }

    /// Splits the marked squares, then splits further squares until the result
    /// is 1-irregular again.
    pub fn refine(&self, marked: &[DyadicSquare]) -> Result<RefineOutcome, GeometryError> {
        if marked.is_empty() {
            return Err(GeometryError::EmptyMarking);
        }
        let marked: BTreeSet<DyadicSquare> = marked.iter().copied().collect();
        if let Some(bad) = marked.iter().find(|q| !self.contains(q)) {
            return Err(GeometryError::InvalidMarking(*bad));
        }
        let mut squares = self.squares.clone();
        let mut work: Vec<DyadicSquare> = Vec::new();
        for q in &marked {
            let kids = q.children(self.max_depth)?;
            squares.remove(q);
            squares.extend(kids);
            work.extend(kids);
        }

        let mut closure = BTreeSet::new();
        let covering = |set: &BTreeSet<DyadicSquare>, q: &DyadicSquare| {
            (0..=q.level).rev().map(|l| q.ancestor(l)).find(|a| set.contains(a))
        };
        while let Some(q) = work.pop() {
            if !squares.contains(&q) || q.level < 2 {
                continue;
            }
            let mut split_any = false;
            for side in Side::ALL {
                let Some(adj) = q.across(side) else { continue };
                let Some(nb) = covering(&squares, &adj) else { continue };
                if nb.level + 1 < q.level {
                    let kids = nb.children(self.max_depth)?;
                    squares.remove(&nb);
                    squares.extend(kids);
                    work.extend(kids);
                    closure.insert(nb);
                    split_any = true;
                }
            }
            if split_any {
                work.push(q);
            }
        }

        Ok(RefineOutcome {
            partition: MacroPartition {
                squares,
                generation: self.generation + 1,
                max_depth: self.max_depth,
            },
            marked: marked.into_iter().collect(),
            closure: closure.into_iter().collect(),
        })
    }

    /// Refines every square once.
    pub fn refine_uniformly(&self) -> Result<MacroPartition, GeometryError> {
        let all: Vec<_> = self.squares.iter().copied().collect();
        Ok(self.refine(&all)?.partition)
    }

    /// True if every square of `self` is a union of squares of `finer`.
    pub fn is_refined_by(&self, finer: &MacroPartition) -> bool {
        finer.squares.iter().all(|q| self.covering(q).is_some())
    }

    /// Plain-text dump: header then one `m ix iy` line per square.
    pub fn to_dump(&self) -> String {
        let mut s = format!("dyadic-partition v1 count={}\n", self.len());
        for q in &self.squares {
            s.push_str(&format!("{} {} {}\n", q.level, q.ix, q.iy));
        }
        s
    }

    pub fn from_dump(text: &str) -> Result<Self, GeometryError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| GeometryError::Parse("empty input".into()))?;
        let count: usize = header
            .strip_prefix("dyadic-partition v1 count=")
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| GeometryError::Parse(format!("bad header `{header}`")))?;
        let mut squares = Vec::with_capacity(count);
        for line in lines {
            let f: Vec<u32> = line
                .split_whitespace()
                .map(|t| t.parse::<u32>())
                .collect::<Result<_, _>>()
                .map_err(|e| GeometryError::Parse(format!("`{line}`: {e}")))?;
            if f.len() != 3 || f[0] > COORD_BITS as u32 {
                return Err(GeometryError::Parse(format!("`{line}`")));
            }
            squares.push(DyadicSquare::new(f[0] as u8, f[1], f[2])?);
        }
        if squares.len() != count {
            return Err(GeometryError::Parse(format!("expected {count} squares, found {}", squares.len())));
        }
        Self::from_squares(squares, DEFAULT_MAX_DEPTH)
    }
}

/// Uniform `n x n` mesh of the micro cell `Y = [0,1]^2` with the reaction
/// interface given as a set of sides.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroMesh {
    n: usize,
    gamma_r: Vec<Side>,
}

impl MicroMesh {
    pub fn new(n: usize, gamma_r: &[Side]) -> Result<Self, GeometryError> {
        let mut sides: Vec<Side> = gamma_r.to_vec();
        sides.sort();
        sides.dedup();
        if n == 0 || sides.is_empty() {
            return Err(GeometryError::InvalidMicroMesh);
        }
        Ok(Self { n, gamma_r: sides })
    }

    /// Mesh with the interface on the top edge `y2 = 1`.
    pub fn with_top_interface(n: usize) -> Result<Self, GeometryError> {
        Self::new(n, &[Side::Top])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gamma_r(&self) -> &[Side] {
        &self.gamma_r
    }

    pub fn is_reactive(&self, side: Side) -> bool {
        self.gamma_r.contains(&side)
    }

    /// Surface measure of the reaction interface.
    pub fn gamma_r_measure(&self) -> f64 {
        self.gamma_r.len() as f64
    }

    pub fn h(&self) -> f64 {
        std::f64::consts::SQRT_2 / self.n as f64
    }

    pub fn num_nodes(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        iy * (self.n + 1) + ix
    }

    pub fn node(&self, j: usize) -> [f64; 2] {
        let (ix, iy) = (j % (self.n + 1), j / (self.n + 1));
        [ix as f64 / self.n as f64, iy as f64 / self.n as f64]
    }

    /// Corner node indices of cell `(cx, cy)` in counter-clockwise order.
    pub fn cell_nodes(&self, cx: usize, cy: usize) -> [usize; 4] {
        [
            self.node_index(cx, cy),
            self.node_index(cx + 1, cy),
            self.node_index(cx + 1, cy + 1),
            self.node_index(cx, cy + 1),
        ]
    }

    /// Boundary edges on a side as node pairs, ordered along the side.
    pub fn side_edges(&self, side: Side) -> Vec<[usize; 2]> {
        let n = self.n;
        (0..n)
            .map(|k| match side {
                Side::Bottom => [self.node_index(k, 0), self.node_index(k + 1, 0)],
                Side::Top => [self.node_index(k, n), self.node_index(k + 1, n)],
                Side::Left => [self.node_index(0, k), self.node_index(0, k + 1)],
                Side::Right => [self.node_index(n, k), self.node_index(n, k + 1)],
            })
            .collect()
    }

    pub fn to_dump(&self) -> String {
        let sides: Vec<&str> = self.gamma_r.iter().map(|s| s.name()).collect();
        format!("micromesh v1 n={} gammaR={}\n", self.n, sides.join(","))
    }

    pub fn from_dump(text: &str) -> Result<Self, GeometryError> {
        let line = text.lines().next().unwrap_or("").trim();
        let rest = line
            .strip_prefix("micromesh v1 ")
            .ok_or_else(|| GeometryError::Parse(format!("bad header `{line}`")))?;
        let mut n = None;
        let mut sides = Vec::new();
        for tok in rest.split_whitespace() {
            if let Some(v) = tok.strip_prefix("n=") {
                n = v.parse().ok();
            } else if let Some(v) = tok.strip_prefix("gammaR=") {
                for s in v.split(',') {
                    sides.push(Side::parse(s).ok_or_else(|| GeometryError::Parse(format!("side `{s}`")))?);
                }
            }
        }
        let n = n.ok_or_else(|| GeometryError::Parse("missing n".into()))?;
        Self::new(n, &sides)
    }
}

/// Mesh sizes of the macro partition and the micro mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSize {
    pub h_omega: f64,
    pub h_y: f64,
}

pub fn mesh_size(p: &MacroPartition, y: &MicroMesh) -> MeshSize {
    MeshSize { h_omega: p.h(), h_y: y.h() }
}

/// Brute-force O(N^2) neighbour search used to cross-check [`MacroPartition::neighbors`].
pub fn neighbors_brute_force(p: &MacroPartition, q: &DyadicSquare) -> Vec<DyadicSquare> {
    p.squares().filter(|s| *s != q && q.shared_edge_length(s) > 0).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(level: u8, ix: u32, iy: u32) -> DyadicSquare {
        DyadicSquare { level, ix, iy }
    }

    #[test]
    fn children_of_root_and_index_doubling() {
        let kids = DyadicSquare::ROOT.children(DEFAULT_MAX_DEPTH).unwrap();
        let set: BTreeSet<_> = kids.into_iter().collect();
        let want: BTreeSet<_> = [sq(1, 0, 0), sq(1, 1, 0), sq(1, 0, 1), sq(1, 1, 1)].into_iter().collect();
        assert_eq!(set, want);

        let kids = sq(1, 1, 0).children(DEFAULT_MAX_DEPTH).unwrap();
        let set: BTreeSet<_> = kids.into_iter().collect();
        let want: BTreeSet<_> = [sq(2, 2, 0), sq(2, 3, 0), sq(2, 2, 1), sq(2, 3, 1)].into_iter().collect();
        assert_eq!(set, want);
    }

    #[test]
    fn child_area_is_quarter() {
        for m in 0..6u8 {
            let q = sq(m, 0, 0);
            for c in q.children(DEFAULT_MAX_DEPTH).unwrap() {
                assert_eq!(c.area(), 4f64.powi(-(m as i32 + 1)));
            }
        }
    }

    #[test]
    fn depth_limit_is_enforced() {
        let q = sq(3, 1, 1);
        assert!(matches!(q.children(3), Err(GeometryError::DepthLimit { .. })));
    }

    #[test]
    fn single_split_and_seven_squares() {
        let p = MacroPartition::unit();
        let r = p.refine(&[DyadicSquare::ROOT]).unwrap();
        assert_eq!(r.partition.len(), 4);
        assert_eq!(r.partition.generation(), 1);

        let p1 = MacroPartition::uniform(1);
        let r = p1.refine(&[sq(1, 0, 0)]).unwrap();
        assert_eq!(r.partition.len(), 7);
        assert!(r.closure.is_empty());
        assert!(r.partition.is_one_irregular());
    }

    #[test]
    fn second_refinement_triggers_closure() {
        let p1 = MacroPartition::uniform(1);
        let p2 = p1.refine(&[sq(1, 0, 0)]).unwrap().partition;
        // child touching the two level-1 neighbours
        let p3 = p2.refine(&[sq(2, 1, 1)]).unwrap();
        // brute-force level-gap audit of the result
        for q in p3.partition.squares() {
            for n in neighbors_brute_force(&p3.partition, q) {
                assert!(n.level.abs_diff(q.level) <= 1, "{q} vs {n}");
            }
        }
        let closure: BTreeSet<_> = p3.closure.iter().copied().collect();
        let want: BTreeSet<_> = [sq(1, 1, 0), sq(1, 0, 1)].into_iter().collect();
        assert_eq!(closure, want);
        assert!(p3.partition.area_is_one());
    }

    #[test]
    fn invalid_marking_and_empty_marking() {
        let p = MacroPartition::uniform(1);
        assert_eq!(p.refine(&[]).unwrap_err(), GeometryError::EmptyMarking);
        assert!(matches!(p.refine(&[DyadicSquare::ROOT]), Err(GeometryError::InvalidMarking(_))));
    }

    #[test]
    fn mesh_sizes() {
        let y = MicroMesh::with_top_interface(4).unwrap();
        for m in 0..5 {
            let s = mesh_size(&MacroPartition::uniform(m), &y);
            assert!((s.h_omega - (-(m as f64)).exp2() * 2f64.sqrt()).abs() < 1e-15);
        }
        assert!((y.h() - 2f64.sqrt() / 4.0).abs() < 1e-15);

        let mut p = MacroPartition::uniform(1);
        for _ in 0..2 {
            let target = *p.squares().find(|q| q.ix == 0 && q.iy == 0).unwrap();
            p = p.refine(&[target]).unwrap().partition;
        }
        assert_eq!(p.max_level(), 3);
        assert!((p.h() - 0.5 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn neighbors_of_corner_square() {
        let p = MacroPartition::uniform(1);
        let n = p.neighbors(&sq(1, 0, 0)).unwrap();
        assert_eq!(n, vec![sq(1, 0, 1), sq(1, 1, 0)]);
        assert!(MacroPartition::unit().neighbors(&DyadicSquare::ROOT).unwrap().is_empty());
        assert!(p.neighbors(&sq(2, 0, 0)).is_err());
    }

    #[test]
    fn neighbors_agree_with_brute_force_on_mixed_partition() {
        let p1 = MacroPartition::uniform(1);
        let p2 = p1.refine(&[sq(1, 0, 0)]).unwrap().partition;
        let p3 = p2.refine(&[sq(2, 1, 1)]).unwrap().partition;
        for q in p3.squares() {
            let mut a = p3.neighbors(q).unwrap();
            let mut b = neighbors_brute_force(&p3, q);
            a.sort();
            b.sort();
            assert_eq!(a, b, "neighbours of {q}");
        }
    }

    #[test]
    fn dump_round_trip() {
        let p = MacroPartition::uniform(1).refine(&[sq(1, 1, 1)]).unwrap().partition;
        let text = p.to_dump();
        assert!(text.starts_with("dyadic-partition v1 count=7\n"));
        let q = MacroPartition::from_dump(&text).unwrap();
        assert_eq!(q.squares().collect::<Vec<_>>(), p.squares().collect::<Vec<_>>());

        let y = MicroMesh::new(8, &[Side::Top, Side::Left]).unwrap();
        assert_eq!(y.to_dump(), "micromesh v1 n=8 gammaR=top,left\n");
        assert_eq!(MicroMesh::from_dump(&y.to_dump()).unwrap(), y);
    }

    #[test]
    fn micro_mesh_requires_interface() {
        assert_eq!(MicroMesh::new(4, &[]).unwrap_err(), GeometryError::InvalidMicroMesh);
        assert_eq!(MicroMesh::new(0, &[Side::Top]).unwrap_err(), GeometryError::InvalidMicroMesh);
    }

    #[test]
    fn locate_points() {
        let p = MacroPartition::uniform(1).refine(&[sq(1, 0, 0)]).unwrap().partition;
        assert_eq!(p.locate([0.1, 0.1]), Some(sq(2, 0, 0)));
        assert_eq!(p.locate([0.9, 0.2]), Some(sq(1, 1, 0)));
        assert_eq!(p.locate([1.0, 1.0]), Some(sq(1, 1, 1)));
        assert_eq!(p.locate([1.5, 0.0]), None);
    }
}
