//! A-priori compression of wavelet Galerkin matrices and entry assembly.
//!
//! Distances entering the compression rule are measured in units of the
//! root cell side, so level-`j` supports have diameter `∼ 2^{-j}` whatever
//! the physical size of the domain.
//!
//! Entries are computed by bilinearity: every basis function is a finite sum
//! of constants on full dyadic cells, and the form is evaluated on pairs of
//! such cells. For the fractional Laplacian
//!
//! * disjoint cells: `a(1_B, 1_A) = −∫_A ∫_B k`,
//! * `B ⊆ A`: `a(1_B, 1_A) = ∫_B ∫_{D∖A} k`,
//!
//! while plain kernels use `∫_A ∫_B k` throughout. Cell-pair integrals are
//! cached by relative geometry.

use std::ops::Range;

use nalgebra::DMatrix;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelSpec};
use crate::meshgeom::{CellId, CellTree, GridBox};
use crate::quadrature::{fractional_interval_pair, BoxPairIntegrator};
use crate::sparse::SparseMatrix;
use crate::wavelet::WaveletBasis;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompressionParams {
    pub a: f64,
    pub d: usize,
    pub dtilde: usize,
    pub delta: f64,
    pub q: f64,
    pub max_level: u32,
}

impl CompressionParams {
    /// Checks `a > 1` and `d < δ < d̃ + 2q`.
    pub fn new(a: f64, d: usize, dtilde: usize, delta: f64, q: f64, max_level: u32) -> Result<Self> {
        let p = Self::new_unchecked(a, d, dtilde, delta, q, max_level);
        p.validate()?;
        Ok(p)
    }

    /// Skips the parameter constraints; used to reproduce reference settings
    /// at their boundary such as `a = 1`.
    pub fn new_unchecked(a: f64, d: usize, dtilde: usize, delta: f64, q: f64, max_level: u32) -> Self {
        CompressionParams {
            a,
            d,
            dtilde,
            delta,
            q,
            max_level,
        }
    }

    /// `a = 1.25` and `δ` at the midpoint of its admissible interval.
    pub fn defaults(basis: &WaveletBasis, kernel: &KernelSpec) -> Result<Self> {
        let d = basis.approximation_order();
        let dt = basis.vanishing_moments();
        let q = 0.5 * kernel.order2q;
        let delta = 0.5 * (d as f64 + dt as f64 + 2.0 * q);
        Self::new(1.25, d, dt, delta, q, basis.max_level())
    }

    pub fn for_basis(basis: &WaveletBasis, kernel: &KernelSpec, a: f64, delta: f64) -> Result<Self> {
        Self::new(
            a,
            basis.approximation_order(),
            basis.vanishing_moments(),
            delta,
            0.5 * kernel.order2q,
            basis.max_level(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 1.0) {
            return Err(Error::Parameter {
                name: "compression.a",
                value: self.a,
                constraint: "a > 1".into(),
            });
        }
        let upper = self.dtilde as f64 + 2.0 * self.q;
        if !((self.d as f64) < self.delta && self.delta < upper) {
            return Err(Error::Parameter {
                name: "compression.delta",
                value: self.delta,
                constraint: format!("d < δ < d̃ + 2q, i.e. {} < δ < {}", self.d, upper),
            });
        }
        Ok(())
    }
}

/// Cut-off parameters `(B_{j,j'}, B^s_{j,j'})`.
pub fn cutoff_parameters(p: &CompressionParams, j: u32, j2: u32) -> Result<(f64, f64)> {
    if j > p.max_level || j2 > p.max_level {
        return Err(Error::Invalid(format!(
            "levels ({j}, {j2}) exceed J = {}",
            p.max_level
        )));
    }
    p.validate()?;
    Ok(cutoffs_unchecked(p, j, j2))
}

fn cutoffs_unchecked(p: &CompressionParams, j: u32, j2: u32) -> (f64, f64) {
    let (jf, j2f) = (j as f64, j2 as f64);
    let big_j = p.max_level as f64;
    let dt = p.dtilde as f64;
    let jmin = jf.min(j2f);
    let jmax = jf.max(j2f);
    let b = p.a
        * f64::max(
            2f64.powf(-jmin),
            2f64.powf((2.0 * big_j * (p.delta - p.q) - (jf + j2f) * (p.delta + dt)) / (2.0 * (dt + p.q))),
        );
    let bs = p.a
        * f64::max(
            2f64.powf(-jmax),
            2f64.powf(
                (2.0 * big_j * (p.delta - p.q) - (jf + j2f) * p.delta - jmax * dt) / (dt + 2.0 * p.q),
            ),
        );
    (b, bs)
}

/// Distance between the support boxes of two cells in units of the root side.
pub fn support_distance(tree: &CellTree, a: CellId, b: CellId) -> f64 {
    let g = tree.grid_box(a).gap_sq(&tree.grid_box(b), tree.dim());
    (g as f64).sqrt() / (1u64 << tree.max_level()) as f64
}

/// Whether the pair with levels `(j, j2)`, support distance `dist` and
/// singular-support distances `dist_s` (`D^s_λ` vs `D_λ'`) and `dist_s2`
/// (`D_λ` vs `D^s_λ'`) is dropped by the a-priori rule.
pub fn is_dropped(
    p: &CompressionParams,
    j: u32,
    j2: u32,
    dist: f64,
    dist_s: f64,
    dist_s2: f64,
) -> bool {
    let (b, bs) = cutoffs_unchecked(p, j, j2);
    if dist > b && j > 0 && j2 > 0 {
        return true;
    }
    if dist <= 2f64.powi(-(j.min(j2) as i32)) {
        if j2 > j && dist_s > bs {
            return true;
        }
        if j > j2 && dist_s2 > bs {
            return true;
        }
    }
    false
}

/// Retained index pairs, stored per column with sorted rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsityPattern {
    pub n: usize,
    pub cols: Vec<Vec<usize>>,
    pub symmetric: bool,
}

impl SparsityPattern {
    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    pub fn anz(&self) -> f64 {
        self.nnz() as f64 / self.n as f64
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.cols[j].binary_search(&i).is_ok()
    }

    pub fn from_matrix(m: &SparseMatrix) -> Self {
        SparsityPattern {
            n: m.ncols(),
            cols: (0..m.ncols()).map(|c| m.col(c).0.to_vec()).collect(),
            symmetric: m.is_structurally_symmetric(),
        }
    }

    /// Pattern of `(i, j)` and `(j, i)` for every stored `(i, j)`.
    pub fn symmetrized(&self) -> SparsityPattern {
        let mut cols = self.cols.clone();
        for (j, rows) in self.cols.iter().enumerate() {
            for &i in rows {
                cols[i].push(j);
            }
        }
        for c in cols.iter_mut() {
            c.sort_unstable();
            c.dedup();
        }
        SparsityPattern {
            n: self.n,
            cols,
            symmetric: true,
        }
    }
}

/// Functions sharing a support cell and a level, with their joint pieces.
#[derive(Clone, Debug)]
pub struct Group {
    pub level: u32,
    pub cell: CellId,
    pub range: Range<usize>,
    pub pieces: Vec<CellId>,
    /// Row-major `pieces x functions` values.
    pub values: Vec<f64>,
}

/// Splits the basis into groups; group indices follow basis order.
pub fn function_groups(basis: &WaveletBasis) -> Vec<Group> {
    let tree = basis.tree();
    let scale = 1.0 / tree.leaf_measure().sqrt();
    let idx = basis.indices();
    let mut groups = Vec::new();
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len()
            && idx[end].level == idx[start].level
            && idx[end].support == idx[start].support
        {
            end += 1;
        }
        let cell = idx[start].support;
        let m = end - start;
        let base = tree.cell(cell).leaf_range.start;
        let tol: Vec<f64> = (start..end)
            .map(|i| 1e-12 * basis.coefficients(i).iter().fold(0.0f64, |a, v| a.max(v.abs())))
            .collect();
        let mut pieces = Vec::new();
        let mut values = Vec::new();
        let mut stack = vec![cell];
        while let Some(c) = stack.pop() {
            let cc = tree.cell(c);
            let r = cc.leaf_range.start - base..cc.leaf_range.end - base;
            let constant = cc.full
                && (start..end).zip(&tol).all(|(i, &t)| {
                    let f = &basis.coefficients(i)[r.clone()];
                    f.iter().all(|v| (v - f[0]).abs() <= t)
                });
            if constant {
                let vals: Vec<f64> = (start..end)
                    .map(|i| {
                        let f = &basis.coefficients(i)[r.clone()];
                        scale * f.iter().sum::<f64>() / f.len() as f64
                    })
                    .collect();
                if vals.iter().zip(&tol).any(|(v, t)| v.abs() > *t * scale) {
                    pieces.push(c);
                    values.extend(vals);
                }
            } else {
                stack.extend(cc.children.iter().rev());
            }
        }
        debug_assert_eq!(values.len(), pieces.len() * m);
        groups.push(Group {
            level: idx[start].level,
            cell,
            range: start..end,
            pieces,
            values,
        });
        start = end;
    }
    groups
}

/// Retained group pairs `(g, g2)` in both orientations, sorted.
pub fn retained_group_pairs(basis: &WaveletBasis, groups: &[Group], p: &CompressionParams) -> Vec<(usize, usize)> {
    let tree = basis.tree();
    let big_j = tree.max_level();
    let dim = tree.dim();
    let unit = (1u64 << big_j) as f64;
    // groups by (level, cell)
    let mut by_level: Vec<FxHashMap<CellId, usize>> = vec![FxHashMap::default(); big_j as usize + 1];
    for (g, grp) in groups.iter().enumerate() {
        by_level[grp.level as usize].insert(grp.cell, g);
    }
    let mut out = Vec::new();
    for (g, grp) in groups.iter().enumerate() {
        let j = grp.level;
        let cbox = tree.grid_box(grp.cell);
        for j2 in 0..=big_j {
            if by_level[j2 as usize].is_empty() {
                continue;
            }
            let candidates: Vec<usize> = if j == 0 || j2 == 0 {
                let mut v: Vec<usize> = by_level[j2 as usize].values().cloned().collect();
                v.sort_unstable();
                v
            } else {
                let (b, _) = cutoffs_unchecked(p, j, j2);
                let tl = j2 - 1;
                let s = 1i64 << (big_j - tl);
                let per_side = 1i64 << tl;
                let reach = (b * unit).min(4.0 * unit) as i64 + 1;
                let mut lo = [0i64; 2];
                let mut hi = [0i64; 2];
                for d in 0..dim {
                    lo[d] = ((cbox.lo[d] - reach).div_euclid(s) - 1).max(0);
                    hi[d] = ((cbox.hi[d] + reach).div_euclid(s) + 1).min(per_side - 1);
                }
                let mut v = Vec::new();
                for k0 in lo[0]..=hi[0] {
                    for k1 in lo[1]..=hi[1] {
                        if let Some(c) = tree.find(tl, [k0 as u32, k1 as u32]) {
                            if let Some(&g2) = by_level[j2 as usize].get(&c) {
                                v.push(g2);
                            }
                        }
                    }
                }
                v
            };
            for g2 in candidates {
                let other = &groups[g2];
                let dist = support_distance(tree, grp.cell, other.cell);
                // singular supports coincide with supports for piecewise constants
                let ds = support_distance(tree, grp.cell, other.cell);
                if !is_dropped(p, j, j2, dist, ds, ds) {
                    out.push((g, g2));
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Retained index pairs under the a-priori rule.
pub fn compression_pattern(basis: &WaveletBasis, p: &CompressionParams) -> SparsityPattern {
    let groups = function_groups(basis);
    pattern_from_groups(basis.len(), &groups, &retained_group_pairs(basis, &groups, p))
}

fn pattern_from_groups(n: usize, groups: &[Group], pairs: &[(usize, usize)]) -> SparsityPattern {
    let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(g, g2) in pairs {
        for c in groups[g2].range.clone() {
            cols[c].extend(groups[g].range.clone());
        }
    }
    for c in cols.iter_mut() {
        c.sort_unstable();
    }
    SparsityPattern {
        n,
        cols,
        symmetric: true,
    }
}

/// Evaluates the Galerkin form on indicator functions of cells.
pub struct Assembler<'a> {
    basis: &'a WaveletBasis,
    kernel: KernelSpec,
    integrator: BoxPairIntegrator,
    boxes: FxHashMap<[i64; 6], f64>,
    complements: FxHashMap<(CellId, CellId), f64>,
}

impl<'a> Assembler<'a> {
    pub fn new(kernel: &KernelSpec, basis: &'a WaveletBasis) -> Result<Self> {
        if kernel.dim != basis.dim() {
            return Err(Error::Dimension(format!(
                "kernel in {}D, basis in {}D",
                kernel.dim,
                basis.dim()
            )));
        }
        Ok(Assembler {
            basis,
            kernel: kernel.clone(),
            integrator: BoxPairIntegrator::new(kernel),
            boxes: FxHashMap::default(),
            complements: FxHashMap::default(),
        })
    }

    fn tree(&self) -> &'a CellTree {
        self.basis.tree()
    }

    /// `∫_A ∫_B k(‖x−y‖) dy dx` for boxes in leaf units.
    pub fn box_integral(&mut self, a: &GridBox, b: &GridBox) -> Result<f64> {
        let dim = self.kernel.dim;
        let key = canonical_key(a, b, dim);
        if let Some(&v) = self.boxes.get(&key) {
            return Ok(v);
        }
        let h = self.tree().leaf_width();
        let v = match self.kernel.kind {
            KernelKind::FractionalLaplacian { s } if dim == 1 && !a.overlaps(b, 1) => {
                let gap = (b.lo[0] - a.hi[0]).max(a.lo[0] - b.hi[0]);
                let wmax = a.width(0).max(b.width(0));
                if gap < 4 * wmax {
                    let ia = (a.lo[0] as f64 * h, a.hi[0] as f64 * h);
                    let ib = (b.lo[0] as f64 * h, b.hi[0] as f64 * h);
                    2.0 * fractional_interval_pair(s, ia, ib)
                } else {
                    self.integrator.integrate(&self.phys(a), &self.phys(b))?
                }
            }
            _ => self.integrator.integrate(&self.phys(a), &self.phys(b))?,
        };
        self.boxes.insert(key, v);
        Ok(v)
    }

    fn phys(&self, b: &GridBox) -> crate::meshgeom::Aabb {
        let h = self.tree().leaf_width();
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for d in 0..self.kernel.dim {
            lo[d] = b.lo[d] as f64 * h;
            hi[d] = b.hi[d] as f64 * h;
        }
        crate::meshgeom::Aabb {
            lo,
            hi,
            dim: self.kernel.dim,
        }
    }

    /// `∫_B ∫_{D∖A} k` for `B ⊆ A`.
    fn complement_integral(&mut self, b: CellId, a: CellId) -> Result<f64> {
        if let Some(&v) = self.complements.get(&(b, a)) {
            return Ok(v);
        }
        let tree = self.tree();
        let bb = tree.grid_box(b);
        let mut total = 0.0;
        for c in tree.complement_cover(a) {
            total += self.box_integral(&bb, &tree.grid_box(c))?;
        }
        self.complements.insert((b, a), total);
        Ok(total)
    }

    /// Form `a(1_B, 1_A)` on full cells.
    pub fn cell_form(&mut self, a: CellId, b: CellId) -> Result<f64> {
        let tree = self.tree();
        if !self.kernel.is_fractional_laplacian() {
            return self.box_integral(&tree.grid_box(a), &tree.grid_box(b));
        }
        let (la, lb) = (tree.cell(a).level, tree.cell(b).level);
        if a == b {
            self.complement_integral(a, a)
        } else if lb > la && tree.ancestor(b, la) == a {
            self.complement_integral(b, a)
        } else if la > lb && tree.ancestor(a, lb) == b {
            self.complement_integral(a, b)
        } else {
            Ok(-self.box_integral(&tree.grid_box(a), &tree.grid_box(b))?)
        }
    }

    /// Galerkin entry `(A ψ_λ', ψ_λ)` from the pieces of both functions.
    pub fn entry(&mut self, lambda: usize, lambda2: usize) -> Result<f64> {
        let basis = self.basis;
        let mut total = 0.0;
        for &(a, va) in basis.pieces(lambda) {
            for &(b, vb) in basis.pieces(lambda2) {
                total += va * vb * self.cell_form(a, b)?;
            }
        }
        Ok(total)
    }

    /// Block of entries between two groups, row-major `|g| x |g2|`.
    pub fn group_block(&mut self, g: &Group, g2: &Group) -> Result<Vec<f64>> {
        let (m, m2) = (g.range.len(), g2.range.len());
        let np = g.pieces.len();
        // F V2: np x m2
        let mut fv = vec![0.0; np * m2];
        for (pa, &a) in g.pieces.iter().enumerate() {
            for (pb, &b) in g2.pieces.iter().enumerate() {
                let f = self.cell_form(a, b)?;
                if f == 0.0 {
                    continue;
                }
                let row = &g2.values[pb * m2..(pb + 1) * m2];
                for (dst, &v) in fv[pa * m2..(pa + 1) * m2].iter_mut().zip(row) {
                    *dst += f * v;
                }
            }
        }
        let mut out = vec![0.0; m * m2];
        for pa in 0..np {
            let va = &g.values[pa * m..(pa + 1) * m];
            let row = &fv[pa * m2..(pa + 1) * m2];
            for (t, &v) in va.iter().enumerate() {
                if v != 0.0 {
                    for (dst, &r) in out[t * m2..(t + 1) * m2].iter_mut().zip(row) {
                        *dst += v * r;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Single-scale Galerkin matrix on the leaves (dense, for validation).
    pub fn leaf_matrix(&mut self) -> Result<DMatrix<f64>> {
        let tree = self.tree();
        let n = tree.leaf_count();
        let inv = 1.0 / tree.leaf_measure();
        let leaves = tree.leaves().to_vec();
        let mut k = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = inv * self.cell_form(leaves[i], leaves[j])?;
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        Ok(k)
    }
}

/// Canonical cache key of a box pair under translations, reflections,
/// swapping the boxes and permuting the axes.
fn canonical_key(a: &GridBox, b: &GridBox, dim: usize) -> [i64; 6] {
    let mut k1 = [[0i64; 3]; 2];
    let mut k2 = [[0i64; 3]; 2];
    for d in 0..dim {
        let (wa, wb) = (a.width(d), b.width(d));
        let off = b.lo[d] - a.lo[d];
        k1[d] = [wa, wb, off.min(wa - wb - off)];
        k2[d] = [wb, wa, (-off).min(wb - wa + off)];
    }
    if dim == 2 {
        k1.sort_unstable();
        k2.sort_unstable();
    }
    let k = k1.min(k2);
    [k[0][0], k[0][1], k[0][2], k[1][0], k[1][1], k[1][2]]
}

/// Single Galerkin entry `(A ψ_λ', ψ_λ)`.
pub fn assemble_entry(kernel: &KernelSpec, basis: &WaveletBasis, lambda: usize, lambda2: usize) -> Result<f64> {
    Assembler::new(kernel, basis)?.entry(lambda, lambda2)
}

/// Compressed Galerkin matrix: entries on retained pairs only.
pub fn assemble_compressed(kernel: &KernelSpec, basis: &WaveletBasis, p: &CompressionParams) -> Result<SparseMatrix> {
    let groups = function_groups(basis);
    let pairs = retained_group_pairs(basis, &groups, p);
    assemble_group_pairs(kernel, basis, &groups, &pairs)
}

/// Galerkin matrix on every pair of the given pattern.
pub fn assemble_with_pattern(kernel: &KernelSpec, basis: &WaveletBasis, pattern: &SparsityPattern) -> Result<SparseMatrix> {
    let mut asm = Assembler::new(kernel, basis)?;
    let mut trip = Vec::with_capacity(pattern.nnz());
    for (j, rows) in pattern.cols.iter().enumerate() {
        for &i in rows {
            if i <= j {
                let v = asm.entry(i, j)?;
                trip.push((i, j, v));
                if i != j {
                    trip.push((j, i, v));
                }
            } else if !pattern.contains(j, i) {
                trip.push((i, j, asm.entry(i, j)?));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(pattern.n, pattern.n, trip).with_symmetric(pattern.symmetric))
}

fn assemble_group_pairs(
    kernel: &KernelSpec,
    basis: &WaveletBasis,
    groups: &[Group],
    pairs: &[(usize, usize)],
) -> Result<SparseMatrix> {
    let mut asm = Assembler::new(kernel, basis)?;
    let total: usize = pairs
        .iter()
        .map(|&(g, g2)| groups[g].range.len() * groups[g2].range.len())
        .sum();
    let mut trip = Vec::with_capacity(total);
    for &(g, g2) in pairs {
        if g > g2 {
            continue;
        }
        let (ga, gb) = (&groups[g], &groups[g2]);
        let block = asm.group_block(ga, gb)?;
        let m2 = gb.range.len();
        for (t, i) in ga.range.clone().enumerate() {
            for (t2, j) in gb.range.clone().enumerate() {
                let v = block[t * m2 + t2];
                trip.push((i, j, v));
                if g != g2 {
                    trip.push((j, i, v));
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(basis.len(), basis.len(), trip).with_symmetric(true))
}

/// Dense Galerkin matrix in the wavelet basis, via the single-scale matrix
/// and the fast transform. Validation oracle for small `N`.
pub fn assemble_dense(kernel: &KernelSpec, basis: &WaveletBasis) -> Result<DMatrix<f64>> {
    let mut asm = Assembler::new(kernel, basis)?;
    let k = asm.leaf_matrix()?;
    let n = basis.len();
    let mut half = DMatrix::zeros(n, n);
    for c in 0..n {
        let col: Vec<f64> = k.column(c).iter().cloned().collect();
        let w = basis.analyze(&col)?;
        half.column_mut(c).copy_from_slice(&w);
    }
    let mut out = DMatrix::zeros(n, n);
    for r in 0..n {
        let row: Vec<f64> = half.row(r).iter().cloned().collect();
        let w = basis.analyze(&row)?;
        for (c, v) in w.into_iter().enumerate() {
            out[(r, c)] = v;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct DecayRow {
    pub lambda: usize,
    pub lambda2: usize,
    pub entry: f64,
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct DecayReport {
    pub rows: Vec<DecayRow>,
    /// Largest `|entry| / bound` among pairs on the two coarsest level sums.
    pub fitted_constant: f64,
    /// Largest `|entry| / (C · bound)` over all pairs.
    pub max_violation_ratio: f64,
    pub violations: usize,
}

/// Decay bound `2^{-(|λ|+|λ'|)(d̃+n/2)} / dist^{n+2q+2d̃}`.
pub fn decay_bound(basis: &WaveletBasis, kernel: &KernelSpec, j: u32, j2: u32, dist: f64) -> f64 {
    let n = basis.dim() as f64;
    let dt = basis.vanishing_moments() as f64;
    2f64.powf(-((j + j2) as f64) * (dt + 0.5 * n)) / dist.powf(n + kernel.order2q + 2.0 * dt)
}

/// Compares entries against the decay estimate. Pairs with touching
/// supports are skipped.
pub fn verify_decay(basis: &WaveletBasis, kernel: &KernelSpec, sample_pairs: &[(usize, usize)]) -> Result<DecayReport> {
    let mut asm = Assembler::new(kernel, basis)?;
    let tree = basis.tree();
    let mut rows = Vec::new();
    for &(l1, l2) in sample_pairs {
        let (i1, i2) = (basis.index(l1), basis.index(l2));
        let dist = support_distance(tree, i1.support, i2.support);
        if dist <= 0.0 {
            continue;
        }
        rows.push(DecayRow {
            lambda: l1,
            lambda2: l2,
            entry: asm.entry(l1, l2)?,
            bound: decay_bound(basis, kernel, i1.level, i2.level, dist),
        });
    }
    Ok(decay_report(basis, rows))
}

/// Fits the constant on the two smallest level sums present and counts
/// pairs exceeding it.
pub fn decay_report(basis: &WaveletBasis, rows: Vec<DecayRow>) -> DecayReport {
    let level_sum = |r: &DecayRow| basis.index(r.lambda).level + basis.index(r.lambda2).level;
    let mut sums: Vec<u32> = rows.iter().map(level_sum).collect();
    sums.sort_unstable();
    sums.dedup();
    let cutoff = sums.get(1).or(sums.first()).cloned().unwrap_or(0);
    let fitted = rows
        .iter()
        .filter(|r| level_sum(r) <= cutoff)
        .map(|r| r.entry.abs() / r.bound)
        .fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for r in &rows {
        let ratio = r.entry.abs() / (fitted * r.bound);
        worst = worst.max(ratio);
        if ratio > 1.0 {
            violations += 1;
        }
    }
    DecayReport {
        rows,
        fitted_constant: fitted,
        max_violation_ratio: worst,
        violations,
    }
}
