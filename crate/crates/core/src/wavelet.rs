//! Orthonormal piecewise-constant multiwavelets on a [`CellTree`].
//!
//! Each cell collects the scaling functions of its children, splits their span
//! into the part that reproduces polynomials of total degree below the
//! vanishing-moment order and its orthogonal complement, and hands the first
//! part up as its own scaling functions. The complement becomes the cell's
//! wavelets. Cells with too few inputs produce no wavelets and pass all inputs
//! up, which aggregates neighbouring cells automatically.
//!
//! Leaf-cell vectors are ordered like [`CellTree::leaves`]. Wavelet indices are
//! ordered levelwise, then by support cell, then by component; level 0 holds
//! the scaling functions of the root.

use crate::error::{Error, Result};
use crate::meshgeom::{CellId, CellTree};
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WaveletIndex {
    /// Level `|λ|`; wavelets created in a level-`l` cell live on level `l + 1`.
    pub level: u32,
    /// Support cell `D_λ`.
    pub support: CellId,
    /// Position among the functions sharing the support cell.
    pub component: usize,
}

impl WaveletIndex {
    /// Singular support; for piecewise constants this is the support box.
    pub fn singular_support(&self) -> CellId {
        self.support
    }
}

#[derive(Clone, Debug)]
struct CellTransform {
    inputs: usize,
    scaling: usize,
    /// Column-major `inputs x inputs` orthogonal matrix; column `t` expresses
    /// output function `t` in the children's scaling functions.
    q: Vec<f64>,
    first_wavelet: usize,
}

/// A piece of a piecewise-constant function: a full cell and the value taken there.
pub type Piece = (CellId, f64);

#[derive(Clone, Debug)]
pub struct WaveletBasis {
    tree: CellTree,
    vanishing_moments: usize,
    indices: Vec<WaveletIndex>,
    transforms: Vec<Option<CellTransform>>,
    /// Single-scale coefficients of each basis function over its support's leaves.
    functions: Vec<Vec<f64>>,
    pieces: Vec<Vec<Piece>>,
}

/// Exponents of all monomials of total degree below `order` in `dim` variables.
pub fn monomial_exponents(dim: usize, order: usize) -> Vec<[u32; 2]> {
    let mut out = Vec::new();
    for deg in 0..order as u32 {
        if dim == 1 {
            out.push([deg, 0]);
        } else {
            for a in (0..=deg).rev() {
                out.push([a, deg - a]);
            }
        }
    }
    out
}

/// Builds the basis with `vanishing_moments` vanishing moments (`d̃ ≥ 1`).
pub fn build_basis(tree: CellTree, vanishing_moments: usize) -> Result<WaveletBasis> {
    if vanishing_moments == 0 {
        return Err(Error::Parameter {
            name: "vanishing_moments",
            value: 0.0,
            constraint: "d̃ >= 1".into(),
        });
    }
    let dim = tree.dim();
    let exps = monomial_exponents(dim, vanishing_moments);
    if tree.leaf_count() < exps.len() {
        return Err(Error::Capacity {
            leaves: tree.leaf_count(),
            required: exps.len(),
        });
    }
    let h = tree.leaf_width();
    let inv_sqrt_leaf = 1.0 / tree.leaf_measure().sqrt();
    let n_cells = tree.cell_count();

    // scaling functions of each processed cell, column-major over the cell's leaves
    let mut scaling: Vec<Option<(usize, Vec<f64>)>> = vec![None; n_cells];
    let mut transforms: Vec<Option<CellTransform>> = vec![None; n_cells];
    let mut wavelet_vectors: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n_cells];

    for &leaf in tree.leaves() {
        scaling[leaf.0] = Some((1, vec![1.0]));
    }

    for level in (0..tree.max_level()).rev() {
        for &cid in tree.level(level) {
            let cell = tree.cell(cid);
            let n_leaves = cell.leaf_count();
            let start = cell.leaf_range.start;
            // inputs: children's scaling functions, embedded in the cell's leaf range
            let mut inputs: Vec<Vec<f64>> = Vec::new();
            for &ch in &cell.children {
                let (r, data) = scaling[ch.0].take().expect("child processed");
                let crange = tree.cell(ch).leaf_range.clone();
                let cl = crange.len();
                for t in 0..r {
                    let mut v = vec![0.0; n_leaves];
                    v[crange.start - start..crange.end - start]
                        .copy_from_slice(&data[t * cl..(t + 1) * cl]);
                    inputs.push(v);
                }
            }
            let m = inputs.len();

            // moment matrix against monomials centred on the cell, scaled to [-1, 1]
            let nb = tree.nominal_grid_box(cid);
            let mut center = [0.0; 2];
            let half = 0.5 * nb.width(0) as f64;
            for d in 0..dim {
                center[d] = 0.5 * (nb.lo[d] + nb.hi[d]) as f64;
            }
            let p = exps.len();
            let mut leaf_mom = vec![0.0; n_leaves * p];
            for (li, &leaf) in tree.leaves()[cell.leaf_range.clone()].iter().enumerate() {
                let b = tree.grid_box(leaf);
                for (a, e) in exps.iter().enumerate() {
                    let mut val = inv_sqrt_leaf;
                    for d in 0..dim {
                        let lo = (b.lo[d] as f64 - center[d]) / half;
                        let hi = (b.hi[d] as f64 - center[d]) / half;
                        let k = e[d] as i32 + 1;
                        val *= half * h * (hi.powi(k) - lo.powi(k)) / k as f64;
                    }
                    leaf_mom[li * p + a] = val;
                }
            }
            let mut mom = vec![0.0; m * p]; // column-major m x p
            for (i, f) in inputs.iter().enumerate() {
                for a in 0..p {
                    let mut s = 0.0;
                    for (li, &fv) in f.iter().enumerate() {
                        s += fv * leaf_mom[li * p + a];
                    }
                    mom[a * m + i] = s;
                }
            }
            let (q, rank) = orthonormal_split(&mom, m, p);

            let combine = |t: usize| -> Vec<f64> {
                let mut v = vec![0.0; n_leaves];
                for (i, f) in inputs.iter().enumerate() {
                    let c = q[t * m + i];
                    if c != 0.0 {
                        for (dst, &fv) in v.iter_mut().zip(f) {
                            *dst += c * fv;
                        }
                    }
                }
                v
            };
            let mut scal = Vec::with_capacity(rank * n_leaves);
            for t in 0..rank {
                scal.extend(combine(t));
            }
            wavelet_vectors[cid.0] = (rank..m).map(combine).collect();
            scaling[cid.0] = Some((rank, scal));
            transforms[cid.0] = Some(CellTransform {
                inputs: m,
                scaling: rank,
                q,
                first_wavelet: 0,
            });
        }
    }

    // global numbering: root scaling functions, then wavelets level by level
    let root = tree.root();
    let (root_r, root_data) = scaling[root.0].take().expect("root processed");
    let root_leaves = tree.cell(root).leaf_count();
    let mut indices = Vec::with_capacity(tree.leaf_count());
    let mut functions = Vec::with_capacity(tree.leaf_count());
    for t in 0..root_r {
        indices.push(WaveletIndex {
            level: 0,
            support: root,
            component: t,
        });
        functions.push(root_data[t * root_leaves..(t + 1) * root_leaves].to_vec());
    }
    for level in 0..tree.max_level() {
        for &cid in tree.level(level) {
            let tr = transforms[cid.0].as_mut().expect("inner cell has a transform");
            tr.first_wavelet = indices.len();
            for (t, v) in std::mem::take(&mut wavelet_vectors[cid.0]).into_iter().enumerate() {
                indices.push(WaveletIndex {
                    level: level + 1,
                    support: cid,
                    component: t,
                });
                functions.push(v);
            }
        }
    }
    debug_assert_eq!(indices.len(), tree.leaf_count());

    let mut basis = WaveletBasis {
        tree,
        vanishing_moments,
        indices,
        transforms,
        functions,
        pieces: Vec::new(),
    };
    basis.pieces = (0..basis.len()).map(|i| basis.compute_pieces(i)).collect();
    Ok(basis)
}

/// Householder QR with column pivoting of the column-major `m x p` matrix.
///
/// Returns the full orthogonal factor (column-major `m x m`) and the numerical
/// rank; the first `rank` columns span the range of the input, the remaining
/// columns its orthogonal complement.
fn orthonormal_split(a: &[f64], m: usize, p: usize) -> (Vec<f64>, usize) {
    let mut a = a.to_vec();
    let mut norms: Vec<f64> = (0..p)
        .map(|j| a[j * m..(j + 1) * m].iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let reference = norms.iter().cloned().fold(0.0, f64::max);
    let mut reflectors: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut rank = 0;
    for k in 0..m.min(p) {
        // pivot on the largest remaining column
        let (jmax, &nmax) = norms[k..]
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
            .map(|(i, v)| (i + k, v))
            .unwrap();
        if nmax <= 1e-12 * reference || reference == 0.0 {
            break;
        }
        if jmax != k {
            for i in 0..m {
                a.swap(k * m + i, jmax * m + i);
            }
            norms.swap(k, jmax);
        }
        let x = &a[k * m + k..(k + 1) * m];
        let alpha = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let alpha = if x[0] > 0.0 { -alpha } else { alpha };
        let mut v: Vec<f64> = x.to_vec();
        v[0] -= alpha;
        let vnorm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if vnorm > 0.0 {
            for t in v.iter_mut() {
                *t /= vnorm;
            }
            for j in k..p {
                let col = &mut a[j * m + k..(j + 1) * m];
                let dot: f64 = col.iter().zip(&v).map(|(c, w)| c * w).sum();
                for (c, w) in col.iter_mut().zip(&v) {
                    *c -= 2.0 * dot * w;
                }
            }
            reflectors.push((k, v));
        }
        rank = k + 1;
        for j in k + 1..p {
            norms[j] = a[j * m + k + 1..(j + 1) * m]
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt();
        }
    }
    // accumulate Q = H_0 H_1 ... applied to the identity
    let mut q = vec![0.0; m * m];
    for i in 0..m {
        q[i * m + i] = 1.0;
    }
    for (k, v) in reflectors.iter().rev() {
        for j in 0..m {
            let col = &mut q[j * m + k..(j + 1) * m];
            let dot: f64 = col.iter().zip(v).map(|(c, w)| c * w).sum();
            for (c, w) in col.iter_mut().zip(v) {
                *c -= 2.0 * dot * w;
            }
        }
    }
    (q, rank)
}

impl WaveletBasis {
    pub fn tree(&self) -> &CellTree {
        &self.tree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.tree.dim()
    }

    pub fn max_level(&self) -> u32 {
        self.tree.max_level()
    }

    /// Approximation order of piecewise constants.
    pub fn approximation_order(&self) -> usize {
        1
    }

    pub fn vanishing_moments(&self) -> usize {
        self.vanishing_moments
    }

    pub fn indices(&self) -> &[WaveletIndex] {
        &self.indices
    }

    pub fn index(&self, i: usize) -> &WaveletIndex {
        &self.indices[i]
    }

    /// Single-scale (L²-normalised leaf) coefficients of basis function `i`
    /// over the leaves of its support cell.
    pub fn coefficients(&self, i: usize) -> &[f64] {
        &self.functions[i]
    }

    /// Basis function `i` as values on maximal full cells.
    pub fn pieces(&self, i: usize) -> &[Piece] {
        &self.pieces[i]
    }

    /// Number of basis functions per level.
    pub fn level_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.max_level() as usize + 1];
        for idx in &self.indices {
            counts[idx.level as usize] += 1;
        }
        counts
    }

    fn compute_pieces(&self, i: usize) -> Vec<Piece> {
        let support = self.indices[i].support;
        let start = self.tree.cell(support).leaf_range.start;
        let values: Vec<f64> = {
            let scale = 1.0 / self.tree.leaf_measure().sqrt();
            self.functions[i].iter().map(|c| c * scale).collect()
        };
        let vmax = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-12 * vmax;
        let mut out = Vec::new();
        let mut stack = vec![support];
        while let Some(c) = stack.pop() {
            let cell = self.tree.cell(c);
            let vals = &values[cell.leaf_range.start - start..cell.leaf_range.end - start];
            if cell.full && vals.iter().all(|v| (v - vals[0]).abs() <= tol) {
                if vals.iter().any(|v| v.abs() > tol) {
                    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                    out.push((c, mean));
                }
            } else {
                stack.extend(cell.children.iter().rev());
            }
        }
        out
    }

    /// Single-scale coefficients → wavelet coefficients (orthogonal change of basis).
    pub fn analyze(&self, single_scale: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if single_scale.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: single_scale.len(),
            });
        }
        let tree = &self.tree;
        let mut out = vec![0.0; n];
        if tree.max_level() == 0 {
            out.copy_from_slice(single_scale);
            return Ok(out);
        }
        let mut coarse: Vec<Vec<f64>> = vec![Vec::new(); tree.cell_count()];
        for (li, &leaf) in tree.leaves().iter().enumerate() {
            coarse[leaf.0] = vec![single_scale[li]];
        }
        let mut x = Vec::new();
        for level in (0..tree.max_level()).rev() {
            for &cid in tree.level(level) {
                let tr = self.transforms[cid.0].as_ref().unwrap();
                x.clear();
                for &ch in &tree.cell(cid).children {
                    x.extend(std::mem::take(&mut coarse[ch.0]));
                }
                let m = tr.inputs;
                let mut s = Vec::with_capacity(tr.scaling);
                for t in 0..m {
                    let col = &tr.q[t * m..(t + 1) * m];
                    let y: f64 = col.iter().zip(&x).map(|(a, b)| a * b).sum();
                    if t < tr.scaling {
                        s.push(y);
                    } else {
                        out[tr.first_wavelet + t - tr.scaling] = y;
                    }
                }
                coarse[cid.0] = s;
            }
        }
        let root = &coarse[tree.root().0];
        out[..root.len()].copy_from_slice(root);
        Ok(out)
    }

    /// Wavelet coefficients → single-scale coefficients.
    pub fn synthesize(&self, wavelet: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if wavelet.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: wavelet.len(),
            });
        }
        let tree = &self.tree;
        let mut out = vec![0.0; n];
        if tree.max_level() == 0 {
            out.copy_from_slice(wavelet);
            return Ok(out);
        }
        let mut coarse: Vec<Vec<f64>> = vec![Vec::new(); tree.cell_count()];
        let root = tree.root();
        let root_r = self.transforms[root.0].as_ref().unwrap().scaling;
        coarse[root.0] = wavelet[..root_r].to_vec();
        for level in 0..tree.max_level() {
            for &cid in tree.level(level) {
                let tr = self.transforms[cid.0].as_ref().unwrap();
                let m = tr.inputs;
                let s = std::mem::take(&mut coarse[cid.0]);
                let mut x = vec![0.0; m];
                for t in 0..m {
                    let y = if t < tr.scaling {
                        s[t]
                    } else {
                        wavelet[tr.first_wavelet + t - tr.scaling]
                    };
                    if y != 0.0 {
                        let col = &tr.q[t * m..(t + 1) * m];
                        for (xi, &qi) in x.iter_mut().zip(col) {
                            *xi += qi * y;
                        }
                    }
                }
                let mut offset = 0;
                for &ch in &tree.cell(cid).children {
                    let r = match &self.transforms[ch.0] {
                        Some(t) => t.scaling,
                        None => 1,
                    };
                    if tree.cell(ch).is_leaf() {
                        out[tree.cell(ch).leaf_range.start] = x[offset];
                    } else {
                        coarse[ch.0] = x[offset..offset + r].to_vec();
                    }
                    offset += r;
                }
            }
        }
        Ok(out)
    }

    /// Leaf values of a piecewise-constant function → wavelet coefficients `(v, ψ_λ)`.
    pub fn forward_transform(&self, values: &[f64]) -> Result<Vec<f64>> {
        let s = self.tree.leaf_measure().sqrt();
        let scaled: Vec<f64> = values.iter().map(|v| v * s).collect();
        if scaled.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: scaled.len(),
            });
        }
        self.analyze(&scaled)
    }

    /// Wavelet coefficients → leaf values of the represented function.
    pub fn inverse_transform(&self, coefficients: &[f64]) -> Result<Vec<f64>> {
        let s = 1.0 / self.tree.leaf_measure().sqrt();
        let mut out = self.synthesize(coefficients)?;
        for v in out.iter_mut() {
            *v *= s;
        }
        Ok(out)
    }

    /// Gram matrix `[(ψ_λ', ψ_λ)]` computed from the leaf coefficients, with
    /// entries below `drop_tol` in magnitude omitted.
    pub fn gram_matrix(&self, drop_tol: f64) -> SparseMatrix {
        let n = self.len();
        let mut trip = Vec::new();
        for i in 0..n {
            let ri = self.tree.cell(self.indices[i].support).leaf_range.clone();
            for j in 0..n {
                let rj = self.tree.cell(self.indices[j].support).leaf_range.clone();
                let lo = ri.start.max(rj.start);
                let hi = ri.end.min(rj.end);
                if lo >= hi {
                    continue;
                }
                let a = &self.functions[i][lo - ri.start..hi - ri.start];
                let b = &self.functions[j][lo - rj.start..hi - rj.start];
                let g: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                if g.abs() > drop_tol {
                    trip.push((i, j, g));
                }
            }
        }
        SparseMatrix::from_triplets(n, n, trip)
    }
}

/// Mass matrix `G_J`. The basis is orthonormal by construction, so this is
/// the identity; [`WaveletBasis::gram_matrix`] computes it explicitly.
pub fn mass_matrix(basis: &WaveletBasis) -> SparseMatrix {
    SparseMatrix::identity(basis.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgeom::{build_dyadic_hierarchy, DomainSpec};

    fn basis_1d(j: u32, dt: usize) -> WaveletBasis {
        build_basis(build_dyadic_hierarchy(&DomainSpec::interval(1.0), j).unwrap(), dt).unwrap()
    }

    #[test]
    fn haar_on_two_cells() {
        let b = basis_1d(1, 1);
        assert_eq!(b.len(), 2);
        assert_eq!(b.level_counts(), vec![1, 1]);
        let c0 = b.coefficients(0);
        let c1 = b.coefficients(1);
        assert!((c0[0] - c0[1]).abs() < 1e-15);
        assert!((c1[0] + c1[1]).abs() < 1e-15);
    }

    #[test]
    fn dyadic_counts() {
        let b = basis_1d(3, 1);
        assert_eq!(b.len(), 8);
        assert_eq!(b.level_counts(), vec![1, 1, 2, 4]);
    }

    #[test]
    fn zeroth_moment_vanishes() {
        for dt in 1..=3 {
            let b = basis_1d(5, dt);
            for (i, idx) in b.indices().iter().enumerate() {
                if idx.level > 0 {
                    let s: f64 = b.coefficients(i).iter().sum();
                    assert!(s.abs() < 1e-13, "d̃={dt} index {i}: {s}");
                }
            }
        }
    }

    #[test]
    fn constant_has_single_coefficient() {
        let b = basis_1d(6, 2);
        let w = b.forward_transform(&vec![3.0; 64]).unwrap();
        // span of the level-0 functions contains constants
        let root_count = b.level_counts()[0];
        for (i, v) in w.iter().enumerate().skip(root_count) {
            assert!(v.abs() < 1e-13, "coefficient {i} = {v}");
        }
        let b1 = basis_1d(6, 1);
        let w1 = b1.forward_transform(&vec![3.0; 64]).unwrap();
        assert!((w1[0] - 3.0).abs() < 1e-13);
        assert!(w1[1..].iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn unit_vector_inverts_to_sampled_wavelet() {
        let b = basis_1d(4, 2);
        let n = b.len();
        let k = n - 1;
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let vals = b.inverse_transform(&e).unwrap();
        let tree = b.tree();
        let range = tree.cell(b.index(k).support).leaf_range.clone();
        let scale = 1.0 / tree.leaf_measure().sqrt();
        for (li, v) in vals.iter().enumerate() {
            let expect = if range.contains(&li) {
                b.coefficients(k)[li - range.start] * scale
            } else {
                0.0
            };
            assert!((v - expect).abs() < 1e-13);
        }
        assert!(b.inverse_transform(&vec![0.0; n]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn length_mismatch_is_reported() {
        let b = basis_1d(3, 1);
        assert!(matches!(
            b.forward_transform(&[1.0; 7]),
            Err(Error::LengthMismatch { expected: 8, got: 7 })
        ));
        assert!(b.inverse_transform(&[1.0; 9]).is_err());
    }

    #[test]
    fn too_coarse_tree_is_rejected() {
        let t = build_dyadic_hierarchy(&DomainSpec::square(1.0), 1).unwrap();
        assert!(matches!(
            build_basis(t, 3),
            Err(Error::Capacity {
                leaves: 4,
                required: 6
            })
        ));
    }

    #[test]
    fn haar_pieces_are_children() {
        let b = basis_1d(5, 1);
        for i in 1..b.len() {
            let p = b.pieces(i);
            assert_eq!(p.len(), 2, "index {i}");
        }
        let s = build_basis(build_dyadic_hierarchy(&DomainSpec::square(1.0), 4).unwrap(), 1).unwrap();
        for i in 1..s.len() {
            assert!(s.pieces(i).len() <= 4);
        }
    }

    #[test]
    fn mass_matrix_is_identity() {
        let b = basis_1d(4, 1);
        let g = mass_matrix(&b);
        assert_eq!(g.nnz(), 16);
        assert_eq!(g.anz(), 1.0);
    }
}
