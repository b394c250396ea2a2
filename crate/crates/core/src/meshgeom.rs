//! Dyadic cell hierarchies over intervals, squares and L-shaped domains.
//!
//! Every cell is stored by its level and integer index, so corners are exact
//! dyadic rationals. Geometric queries work on the tight bounding box of the
//! active leaf cells a cell contains; for cells that are not cut by holes this
//! is the nominal dyadic box.

use std::ops::Range;

use crate::error::{Error, Result};

/// Axis-aligned hole in physical coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct HoleBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub enum DomainKind {
    Interval { length: f64 },
    Square { side: f64 },
    /// Square of the given side with its upper-right quadrant removed.
    LShape { side: f64, holes: Vec<HoleBox> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    pub kind: DomainKind,
    /// Lower-left corner of the bounding square (interval start in 1D).
    pub origin: [f64; 2],
}

impl DomainSpec {
    pub fn interval(length: f64) -> Self {
        DomainSpec {
            kind: DomainKind::Interval { length },
            origin: [0.0; 2],
        }
    }

    pub fn square(side: f64) -> Self {
        DomainSpec {
            kind: DomainKind::Square { side },
            origin: [0.0; 2],
        }
    }

    pub fn lshape(side: f64, holes: Vec<HoleBox>) -> Self {
        DomainSpec {
            kind: DomainKind::LShape { side, holes },
            origin: [0.0; 2],
        }
    }

    pub fn with_origin(mut self, origin: [f64; 2]) -> Self {
        self.origin = origin;
        self
    }

    /// Square of the given side centred at the origin.
    pub fn centered_square(side: f64) -> Self {
        Self::square(side).with_origin([-0.5 * side, -0.5 * side])
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            DomainKind::Interval { .. } => 1,
            DomainKind::Square { .. } | DomainKind::LShape { .. } => 2,
        }
    }

    /// Side length of the root cell.
    pub fn extent(&self) -> f64 {
        match self.kind {
            DomainKind::Interval { length } => length,
            DomainKind::Square { side } | DomainKind::LShape { side, .. } => side,
        }
    }

    pub fn holes(&self) -> &[HoleBox] {
        match &self.kind {
            DomainKind::LShape { holes, .. } => holes,
            _ => &[],
        }
    }

    fn validate(&self) -> Result<()> {
        let extent = self.extent();
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::Domain(format!("size must be positive, got {extent}")));
        }
        let holes = self.holes();
        let half = 0.5 * extent;
        for (i, h) in holes.iter().enumerate() {
            let lo = [h.lo[0] - self.origin[0], h.lo[1] - self.origin[1]];
            let hi = [h.hi[0] - self.origin[0], h.hi[1] - self.origin[1]];
            let inside = (0..2).all(|d| lo[d] > 0.0 && hi[d] < extent && lo[d] < hi[d]);
            let hits_quadrant = hi[0] >= half && hi[1] >= half;
            if !inside || hits_quadrant {
                return Err(Error::Domain(format!(
                    "hole {i} is not strictly inside the L-shaped polygon"
                )));
            }
        }
        for i in 0..holes.len() {
            for j in i + 1..holes.len() {
                let (a, b) = (&holes[i], &holes[j]);
                let apart = (0..2).any(|d| a.hi[d] < b.lo[d] || b.hi[d] < a.lo[d]);
                if !apart {
                    return Err(Error::Domain(format!("holes {i} and {j} intersect")));
                }
            }
        }
        Ok(())
    }
}

/// Axis-aligned box in integer leaf units (`hi` exclusive).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridBox {
    pub lo: [i64; 2],
    pub hi: [i64; 2],
}

impl GridBox {
    pub fn width(&self, d: usize) -> i64 {
        self.hi[d] - self.lo[d]
    }

    /// Squared Euclidean gap between two boxes in leaf units.
    pub fn gap_sq(&self, other: &GridBox, dim: usize) -> i64 {
        (0..dim)
            .map(|d| {
                let g = (other.lo[d] - self.hi[d]).max(self.lo[d] - other.hi[d]).max(0);
                g * g
            })
            .sum()
    }

    pub fn contains(&self, other: &GridBox, dim: usize) -> bool {
        (0..dim).all(|d| self.lo[d] <= other.lo[d] && other.hi[d] <= self.hi[d])
    }

    /// True when the interiors intersect.
    pub fn overlaps(&self, other: &GridBox, dim: usize) -> bool {
        (0..dim).all(|d| self.lo[d] < other.hi[d] && other.lo[d] < self.hi[d])
    }
}

/// Physical axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub dim: usize,
}

impl Aabb {
    pub fn center(&self) -> [f64; 2] {
        let mut c = [0.0; 2];
        for d in 0..self.dim {
            c[d] = 0.5 * (self.lo[d] + self.hi[d]);
        }
        c
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim)
            .map(|d| (self.hi[d] - self.lo[d]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance(&self, other: &Aabb) -> f64 {
        (0..self.dim)
            .map(|d| {
                let g = (other.lo[d] - self.hi[d]).max(self.lo[d] - other.hi[d]).max(0.0);
                g * g
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn measure(&self) -> f64 {
        (0..self.dim).map(|d| self.hi[d] - self.lo[d]).product()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId(pub usize);

#[derive(Clone, Debug)]
pub struct Cell {
    pub level: u32,
    pub index: [u32; 2],
    pub parent: Option<CellId>,
    pub children: Vec<CellId>,
    /// Range of this cell's active leaves in [`CellTree::leaves`].
    pub leaf_range: Range<usize>,
    /// Tight box of the active leaves, in leaf units.
    pub active: GridBox,
    /// Every leaf below this cell is active.
    pub full: bool,
}

impl Cell {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_range.len()
    }
}

/// Dyadic hierarchy of cells, immutable after construction.
#[derive(Clone, Debug)]
pub struct CellTree {
    domain: DomainSpec,
    dim: usize,
    max_level: u32,
    cells: Vec<Cell>,
    levels: Vec<Vec<CellId>>,
    leaves: Vec<CellId>,
    root: CellId,
    covers: Vec<Vec<CellId>>,
}

/// Builds the level-0..=`max_level` hierarchy over `domain`.
///
/// Cells that contain no active leaf are dropped at every level; partially
/// covered cells keep the active part only.
pub fn build_dyadic_hierarchy(domain: &DomainSpec, max_level: u32) -> Result<CellTree> {
    domain.validate()?;
    if max_level > 20 {
        return Err(Error::Domain(format!("level {max_level} is too deep")));
    }
    let dim = domain.dim();
    let extent = domain.extent();
    let per_side = 1i64 << max_level;
    let h = extent / per_side as f64;

    if matches!(domain.kind, DomainKind::LShape { .. }) && max_level == 0 {
        return Err(Error::HoleAlignment {
            hole: 0,
            level: max_level,
        });
    }
    // hole boxes in leaf units
    let mut holes = Vec::new();
    for (i, hole) in domain.holes().iter().enumerate() {
        let mut lo = [0i64; 2];
        let mut hi = [0i64; 2];
        for d in 0..2 {
            let a = (hole.lo[d] - domain.origin[d]) / h;
            let b = (hole.hi[d] - domain.origin[d]) / h;
            let (ra, rb) = (a.round(), b.round());
            if (a - ra).abs() > 1e-9 || (b - rb).abs() > 1e-9 {
                return Err(Error::HoleAlignment {
                    hole: i,
                    level: max_level,
                });
            }
            lo[d] = ra as i64;
            hi[d] = rb as i64;
        }
        holes.push(GridBox { lo, hi });
    }
    let lshape = matches!(domain.kind, DomainKind::LShape { .. });
    let half = per_side / 2;
    let leaf_active = |idx: [i64; 2]| -> bool {
        if lshape && idx[0] >= half && idx[1] >= half {
            return false;
        }
        !holes
            .iter()
            .any(|b| (0..2).all(|d| b.lo[d] <= idx[d] && idx[d] < b.hi[d]))
    };

    let mut builder = Builder {
        dim,
        max_level,
        cells: Vec::new(),
        leaves: Vec::new(),
        leaf_active: &leaf_active,
    };
    let root = builder
        .build(0, [0, 0], None)
        .ok_or_else(|| Error::Domain("domain has no active cells".into()))?;
    let Builder { cells, leaves, .. } = builder;

    let mut levels = vec![Vec::new(); max_level as usize + 1];
    for (i, c) in cells.iter().enumerate() {
        levels[c.level as usize].push(CellId(i));
    }
    for lvl in levels.iter_mut() {
        lvl.sort_by_key(|id| {
            let c = &cells[id.0];
            (c.index[0], c.index[1])
        });
    }

    let mut tree = CellTree {
        domain: domain.clone(),
        dim,
        max_level,
        cells,
        levels,
        leaves,
        root,
        covers: Vec::new(),
    };
    tree.covers = (0..tree.cells.len())
        .map(|i| tree.compute_cover(CellId(i)))
        .collect();
    Ok(tree)
}

struct Builder<'a> {
    dim: usize,
    max_level: u32,
    cells: Vec<Cell>,
    leaves: Vec<CellId>,
    leaf_active: &'a dyn Fn([i64; 2]) -> bool,
}

impl Builder<'_> {
    fn build(&mut self, level: u32, index: [u32; 2], parent: Option<CellId>) -> Option<CellId> {
        let scale = 1i64 << (self.max_level - level);
        let lo = [index[0] as i64 * scale, index[1] as i64 * scale];
        if level == self.max_level {
            if !(self.leaf_active)(lo) {
                return None;
            }
            let id = CellId(self.cells.len());
            let mut hi = [lo[0] + 1, 1];
            if self.dim == 2 {
                hi[1] = lo[1] + 1;
            }
            self.cells.push(Cell {
                level,
                index,
                parent,
                children: Vec::new(),
                leaf_range: self.leaves.len()..self.leaves.len() + 1,
                active: GridBox { lo, hi },
                full: true,
            });
            self.leaves.push(id);
            return Some(id);
        }
        // reserve the slot so parents precede children in the arena
        let id = CellId(self.cells.len());
        self.cells.push(Cell {
            level,
            index,
            parent,
            children: Vec::new(),
            leaf_range: 0..0,
            active: GridBox {
                lo: [0; 2],
                hi: [0; 2],
            },
            full: false,
        });
        let start = self.leaves.len();
        let offsets: &[[u32; 2]] = if self.dim == 1 {
            &[[0, 0], [1, 0]]
        } else {
            &[[0, 0], [1, 0], [0, 1], [1, 1]]
        };
        let mut children = Vec::with_capacity(offsets.len());
        for off in offsets {
            let child_index = if self.dim == 1 {
                [2 * index[0] + off[0], 0]
            } else {
                [2 * index[0] + off[0], 2 * index[1] + off[1]]
            };
            if let Some(c) = self.build(level + 1, child_index, Some(id)) {
                children.push(c);
            }
        }
        if children.is_empty() {
            self.cells.pop();
            debug_assert_eq!(self.cells.len(), id.0);
            return None;
        }
        let end = self.leaves.len();
        let mut active = self.cells[children[0].0].active;
        for c in &children[1..] {
            let b = self.cells[c.0].active;
            for d in 0..2 {
                active.lo[d] = active.lo[d].min(b.lo[d]);
                active.hi[d] = active.hi[d].max(b.hi[d]);
            }
        }
        let expected = 1usize << (self.dim as u32 * (self.max_level - level));
        let cell = &mut self.cells[id.0];
        cell.children = children;
        cell.leaf_range = start..end;
        cell.active = active;
        cell.full = end - start == expected;
        Some(id)
    }
}

impl CellTree {
    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn root(&self) -> CellId {
        self.root
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id.0]
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Cells of one level in lexicographic index order.
    pub fn level(&self, j: u32) -> &[CellId] {
        &self.levels[j as usize]
    }

    /// Active leaves in depth-first order; every cell owns a contiguous range.
    pub fn leaves(&self) -> &[CellId] {
        &self.leaves
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    /// Side length of a leaf cell.
    pub fn leaf_width(&self) -> f64 {
        self.domain.extent() / (1u64 << self.max_level) as f64
    }

    /// Measure of a leaf cell.
    pub fn leaf_measure(&self) -> f64 {
        self.leaf_width().powi(self.dim as i32)
    }

    pub fn grid_box(&self, id: CellId) -> GridBox {
        self.cells[id.0].active
    }

    /// Nominal dyadic box of the cell in leaf units, ignoring holes.
    pub fn nominal_grid_box(&self, id: CellId) -> GridBox {
        let c = &self.cells[id.0];
        let scale = 1i64 << (self.max_level - c.level);
        let mut lo = [0i64; 2];
        let mut hi = [0i64, 1];
        for d in 0..self.dim {
            lo[d] = c.index[d] as i64 * scale;
            hi[d] = lo[d] + scale;
        }
        GridBox { lo, hi }
    }

    pub fn to_physical(&self, b: &GridBox) -> Aabb {
        let h = self.leaf_width();
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for d in 0..self.dim {
            lo[d] = self.domain.origin[d] + b.lo[d] as f64 * h;
            hi[d] = self.domain.origin[d] + b.hi[d] as f64 * h;
        }
        Aabb {
            lo,
            hi,
            dim: self.dim,
        }
    }

    /// Physical bounding box of the cell's active part.
    pub fn cell_box(&self, id: CellId) -> Aabb {
        self.to_physical(&self.cells[id.0].active)
    }

    pub fn cell_center(&self, id: CellId) -> [f64; 2] {
        self.cell_box(id).center()
    }

    /// Maximal fully active sub-cells that tile the active part of `id`.
    pub fn cover(&self, id: CellId) -> &[CellId] {
        &self.covers[id.0]
    }

    fn compute_cover(&self, id: CellId) -> Vec<CellId> {
        let c = &self.cells[id.0];
        if c.full {
            return vec![id];
        }
        c.children
            .iter()
            .flat_map(|&ch| self.compute_cover(ch))
            .collect()
    }

    /// Full cells tiling the domain minus the cell `id`.
    pub fn complement_cover(&self, id: CellId) -> Vec<CellId> {
        let mut out = Vec::new();
        let mut node = id;
        while let Some(parent) = self.cells[node.0].parent {
            for &sib in &self.cells[parent.0].children {
                if sib != node {
                    out.extend_from_slice(self.cover(sib));
                }
            }
            node = parent;
        }
        out
    }

    /// Ancestor of `id` at level `j` (`j` must not exceed the cell's level).
    pub fn ancestor(&self, id: CellId, j: u32) -> CellId {
        let mut node = id;
        while self.cells[node.0].level > j {
            node = self.cells[node.0].parent.expect("non-root cell has a parent");
        }
        node
    }

    /// Physical center of every active leaf, in leaf order.
    pub fn leaf_centers(&self) -> Vec<[f64; 2]> {
        self.leaves.iter().map(|&l| self.cell_center(l)).collect()
    }

    /// Looks up the cell with the given level and index.
    pub fn find(&self, level: u32, index: [u32; 2]) -> Option<CellId> {
        let lvl = self.levels.get(level as usize)?;
        lvl.binary_search_by_key(&(index[0], index[1]), |id| {
            let c = &self.cells[id.0];
            (c.index[0], c.index[1])
        })
        .ok()
        .map(|pos| lvl[pos])
    }
}

/// Euclidean distance between the bounding boxes of two cells.
pub fn cell_distance(tree: &CellTree, a: CellId, b: CellId) -> f64 {
    tree.cell_box(a).distance(&tree.cell_box(b))
}

pub fn cell_diameter(tree: &CellTree, a: CellId) -> f64 {
    tree.cell_box(a).diameter()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_leaf_count_and_width() {
        let t = build_dyadic_hierarchy(&DomainSpec::interval(1.0), 3).unwrap();
        assert_eq!(t.leaf_count(), 8);
        for &l in t.leaves() {
            let b = t.cell_box(l);
            assert_eq!(b.hi[0] - b.lo[0], 0.125);
        }
        assert_eq!(t.level(2).len(), 4);
    }

    #[test]
    fn square_leaf_count() {
        let t = build_dyadic_hierarchy(&DomainSpec::square(1.0), 2).unwrap();
        assert_eq!(t.leaf_count(), 16);
    }

    #[test]
    fn lshape_drops_upper_right_quadrant() {
        let t = build_dyadic_hierarchy(&DomainSpec::lshape(4.0, vec![]), 1).unwrap();
        assert_eq!(t.leaf_count(), 3);
        let root = t.cell(t.root());
        assert!(!root.full);
        assert_eq!(t.cover(t.root()).len(), 3);
    }

    #[test]
    fn lshape_with_holes_counts_exactly() {
        let holes = vec![
            HoleBox {
                lo: [0.5, 0.5],
                hi: [1.0, 1.0],
            },
            HoleBox {
                lo: [2.5, 0.5],
                hi: [3.0, 1.5],
            },
        ];
        let t = build_dyadic_hierarchy(&DomainSpec::lshape(4.0, holes), 3).unwrap();
        // 64 leaves, 16 in the removed quadrant, 1 + 2 inside holes
        assert_eq!(t.leaf_count(), 64 - 16 - 3);
    }

    #[test]
    fn misaligned_hole_is_rejected() {
        let holes = vec![HoleBox {
            lo: [0.3, 0.5],
            hi: [1.0, 1.0],
        }];
        let err = build_dyadic_hierarchy(&DomainSpec::lshape(4.0, holes), 3).unwrap_err();
        assert!(matches!(err, Error::HoleAlignment { hole: 0, level: 3 }));
    }

    #[test]
    fn hole_outside_polygon_is_rejected() {
        let holes = vec![HoleBox {
            lo: [2.5, 2.5],
            hi: [3.0, 3.0],
        }];
        assert!(matches!(
            build_dyadic_hierarchy(&DomainSpec::lshape(4.0, holes), 3),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn distances() {
        let t = build_dyadic_hierarchy(&DomainSpec::interval(1.0), 2).unwrap();
        let l1 = t.level(1);
        assert_eq!(cell_distance(&t, l1[0], l1[0]), 0.0);
        assert_eq!(cell_distance(&t, l1[0], l1[1]), 0.0);
        let q = t.level(2)[0];
        assert_eq!(cell_distance(&t, q, l1[1]), 0.25);
        assert_eq!(cell_distance(&t, l1[1], q), 0.25);
    }

    #[test]
    fn diameters() {
        let t = build_dyadic_hierarchy(&DomainSpec::interval(1.0), 1).unwrap();
        assert_eq!(cell_diameter(&t, t.root()), 1.0);
        let s = build_dyadic_hierarchy(&DomainSpec::square(1.0), 2).unwrap();
        assert!((cell_diameter(&s, s.root()) - 2f64.sqrt()).abs() < 1e-15);
        let c = s.level(2)[5];
        assert!((cell_diameter(&s, c) - 2f64.sqrt() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn children_tile_parent() {
        let t = build_dyadic_hierarchy(&DomainSpec::square(2.0), 3).unwrap();
        for i in 0..t.cell_count() {
            let c = t.cell(CellId(i));
            if c.is_leaf() {
                continue;
            }
            let area: i64 = c
                .children
                .iter()
                .map(|&ch| {
                    let b = t.grid_box(ch);
                    b.width(0) * b.width(1)
                })
                .sum();
            let pb = t.grid_box(CellId(i));
            assert_eq!(area, pb.width(0) * pb.width(1));
            for (a, &x) in c.children.iter().enumerate() {
                for &y in &c.children[a + 1..] {
                    assert!(!t.grid_box(x).overlaps(&t.grid_box(y), 2));
                }
            }
        }
    }

    #[test]
    fn complement_cover_tiles_rest_of_domain() {
        let t = build_dyadic_hierarchy(&DomainSpec::lshape(4.0, vec![]), 3).unwrap();
        for &c in t.level(2) {
            let rest: usize = t
                .complement_cover(c)
                .iter()
                .map(|&p| t.cell(p).leaf_count())
                .sum();
            assert_eq!(rest + t.cell(c).leaf_count(), t.leaf_count());
        }
    }
}
