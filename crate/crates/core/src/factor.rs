//! Sparse Cholesky and LU of `P A Pᵀ` by up-looking elimination.

use crate::compress::SparsityPattern;
use crate::error::{Error, Result};
use crate::ordering::Permutation;
use crate::sparse::SparseMatrix;

const NONE: usize = usize::MAX;

/// Elimination tree and factor pattern of `P A Pᵀ`.
#[derive(Clone, Debug)]
pub struct SymbolicFactor {
    pub n: usize,
    pub perm: Permutation,
    /// Strict upper pattern of the permuted matrix, rows sorted, per column.
    upper: Vec<Vec<usize>>,
    pub parent: Vec<usize>,
    /// Pattern of `L` including the diagonal, compressed by column.
    pub colptr: Vec<usize>,
    pub rowidx: Vec<usize>,
}

impl SymbolicFactor {
    pub fn nnz_l(&self) -> usize {
        self.rowidx.len()
    }

    pub fn parent_of(&self, j: usize) -> Option<usize> {
        (self.parent[j] != NONE).then_some(self.parent[j])
    }
}

/// Strict upper pattern of the symmetrized `P A Pᵀ`.
fn permuted_upper(pattern: &SparsityPattern, perm: &Permutation) -> Result<Vec<Vec<usize>>> {
    if perm.len() != pattern.n {
        return Err(Error::LengthMismatch {
            expected: pattern.n,
            got: perm.len(),
        });
    }
    let pi = perm.forward();
    let mut upper = vec![Vec::new(); pattern.n];
    for (j, rows) in pattern.cols.iter().enumerate() {
        for &i in rows {
            let (a, b) = (pi[i], pi[j]);
            match a.cmp(&b) {
                std::cmp::Ordering::Less => upper[b].push(a),
                std::cmp::Ordering::Greater => upper[a].push(b),
                std::cmp::Ordering::Equal => {}
            }
        }
    }
    for u in upper.iter_mut() {
        u.sort_unstable();
        u.dedup();
    }
    Ok(upper)
}

fn etree(upper: &[Vec<usize>]) -> Vec<usize> {
    let n = upper.len();
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &start in &upper[k] {
            let mut i = start;
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero columns of row `k` of `L` (excluding `k`) in topological order:
/// every column appears after all its descendants in the reach.
fn ereach(upper: &[Vec<usize>], parent: &[usize], k: usize, flag: &mut [usize], out: &mut Vec<usize>, stack: &mut Vec<usize>) {
    out.clear();
    flag[k] = k;
    // each path is placed in front of the earlier ones
    let mut chunks: Vec<(usize, usize)> = Vec::new();
    stack.clear();
    for &start in &upper[k] {
        let begin = stack.len();
        let mut i = start;
        while flag[i] != k {
            stack.push(i);
            flag[i] = k;
            i = parent[i];
        }
        if stack.len() > begin {
            chunks.push((begin, stack.len()));
        }
    }
    for &(b, e) in chunks.iter().rev() {
        out.extend_from_slice(&stack[b..e]);
    }
}

/// Column counts of `L` (diagonal included) without storing the pattern.
pub fn symbolic_counts(pattern: &SparsityPattern, perm: &Permutation) -> Result<(Vec<usize>, Vec<usize>)> {
    let upper = permuted_upper(pattern, perm)?;
    let parent = etree(&upper);
    let n = upper.len();
    let mut counts = vec![1usize; n];
    let mut flag = vec![NONE; n];
    for k in 0..n {
        flag[k] = k;
        for &start in &upper[k] {
            let mut i = start;
            while flag[i] != k {
                counts[i] += 1;
                flag[i] = k;
                i = parent[i];
            }
        }
    }
    Ok((parent, counts))
}

/// Nonzeros of `L` (diagonal included) for the given ordering.
pub fn factor_nnz(pattern: &SparsityPattern, perm: &Permutation) -> Result<usize> {
    Ok(symbolic_counts(pattern, perm)?.1.iter().sum())
}

pub fn symbolic_cholesky(pattern: &SparsityPattern, perm: &Permutation) -> Result<SymbolicFactor> {
    let upper = permuted_upper(pattern, perm)?;
    let parent = etree(&upper);
    let n = upper.len();
    let mut flag = vec![NONE; n];
    let (mut reach, mut stack) = (Vec::new(), Vec::new());
    let mut counts = vec![1usize; n];
    for k in 0..n {
        ereach(&upper, &parent, k, &mut flag, &mut reach, &mut stack);
        for &i in &reach {
            counts[i] += 1;
        }
    }
    let mut colptr = vec![0usize; n + 1];
    for j in 0..n {
        colptr[j + 1] = colptr[j] + counts[j];
    }
    let mut next = colptr.clone();
    let mut rowidx = vec![0usize; colptr[n]];
    flag.fill(NONE);
    for k in 0..n {
        ereach(&upper, &parent, k, &mut flag, &mut reach, &mut stack);
        for &i in &reach {
            rowidx[next[i]] = k;
            next[i] += 1;
        }
        rowidx[next[k]] = k;
        next[k] += 1;
    }
    Ok(SymbolicFactor {
        n,
        perm: perm.clone(),
        upper,
        parent,
        colptr,
        rowidx,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorKind {
    Cholesky,
    Lu,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FillStats {
    pub n: usize,
    pub nnz_a: usize,
    pub nnz_l: usize,
    pub anz_a: f64,
    pub anz_l: f64,
}

/// `P A Pᵀ = L Lᵀ` or `P A Pᵀ = L U`; `ut` stores `Uᵀ` on the pattern of `L`.
#[derive(Clone, Debug)]
pub struct FactorBundle {
    pub kind: FactorKind,
    pub perm: Permutation,
    pub l: SparseMatrix,
    pub ut: Option<SparseMatrix>,
    pub stats: FillStats,
}

impl FactorBundle {
    pub fn u(&self) -> Option<SparseMatrix> {
        self.ut.as_ref().map(SparseMatrix::transpose)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        solve(self, b)
    }
}

fn check_square(a: &SparseMatrix, sym: &SymbolicFactor) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", a.nrows(), a.ncols())));
    }
    if a.ncols() != sym.n {
        return Err(Error::LengthMismatch {
            expected: sym.n,
            got: a.ncols(),
        });
    }
    Ok(())
}

fn stats(a: &SparseMatrix, nnz_l: usize) -> FillStats {
    let n = a.ncols();
    FillStats {
        n,
        nnz_a: a.nnz(),
        nnz_l,
        anz_a: a.nnz() as f64 / n as f64,
        anz_l: nnz_l as f64 / n as f64,
    }
}

/// Scatters the entries of column `k` of `c` with rows `≤ k` into `x`.
fn scatter_upper(c: &SparseMatrix, k: usize, x: &mut [f64]) {
    let (rows, vals) = c.col(k);
    for (&i, &v) in rows.iter().zip(vals) {
        if i > k {
            break;
        }
        x[i] = v;
    }
}

pub fn numeric_cholesky(a: &SparseMatrix, sym: &SymbolicFactor) -> Result<FactorBundle> {
    check_square(a, sym)?;
    let n = sym.n;
    let c = a.permute_symmetric(sym.perm.forward());
    let lp = &sym.colptr;
    let li = &sym.rowidx;
    let mut lx = vec![0.0; li.len()];
    let mut next: Vec<usize> = lp[..n].to_vec();
    let mut x = vec![0.0; n];
    let mut flag = vec![NONE; n];
    let (mut reach, mut stack) = (Vec::new(), Vec::new());
    for k in 0..n {
        ereach(&sym.upper, &sym.parent, k, &mut flag, &mut reach, &mut stack);
        scatter_upper(&c, k, &mut x);
        let mut d = x[k];
        x[k] = 0.0;
        for &i in &reach {
            let lki = x[i] / lx[lp[i]];
            x[i] = 0.0;
            for p in lp[i] + 1..next[i] {
                x[li[p]] -= lx[p] * lki;
            }
            d -= lki * lki;
            debug_assert_eq!(li[next[i]], k);
            lx[next[i]] = lki;
            next[i] += 1;
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { column: k, pivot: d });
        }
        lx[next[k]] = d.sqrt();
        next[k] += 1;
    }
    let l = SparseMatrix::from_csc(n, n, lp.clone(), li.clone(), lx)?;
    Ok(FactorBundle {
        kind: FactorKind::Cholesky,
        perm: sym.perm.clone(),
        stats: stats(a, l.nnz()),
        l,
        ut: None,
    })
}

/// Relative pivot threshold against `‖A‖_max`.
pub const PIVOT_TOLERANCE: f64 = 1e-13;

/// LU without pivoting on the symmetric pattern of `sym`.
pub fn numeric_lu(a: &SparseMatrix, sym: &SymbolicFactor) -> Result<FactorBundle> {
    check_square(a, sym)?;
    let n = sym.n;
    let c = a.permute_symmetric(sym.perm.forward());
    let ct = c.transpose();
    let tol = PIVOT_TOLERANCE * a.max_abs();
    let lp = &sym.colptr;
    let li = &sym.rowidx;
    let mut lx = vec![0.0; li.len()];
    let mut ux = vec![0.0; li.len()];
    let mut next: Vec<usize> = lp[..n].to_vec();
    let mut x = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut flag = vec![NONE; n];
    let (mut reach, mut stack) = (Vec::new(), Vec::new());
    for k in 0..n {
        ereach(&sym.upper, &sym.parent, k, &mut flag, &mut reach, &mut stack);
        // x: column k of U by L y = C(:k, k); z: row k of L by Uᵀ z = C(k, :k)ᵀ
        scatter_upper(&c, k, &mut x);
        scatter_upper(&ct, k, &mut z);
        let mut ukk = x[k];
        x[k] = 0.0;
        z[k] = 0.0;
        for &i in &reach {
            let yi = x[i];
            let zi = z[i] / ux[lp[i]];
            x[i] = 0.0;
            z[i] = 0.0;
            for p in lp[i] + 1..next[i] {
                x[li[p]] -= lx[p] * yi;
                z[li[p]] -= ux[p] * zi;
            }
            ukk -= zi * yi;
            lx[next[i]] = zi;
            ux[next[i]] = yi;
            next[i] += 1;
        }
        if !(ukk.abs() >= tol) || ukk == 0.0 {
            return Err(Error::SingularPivot { column: k, pivot: ukk });
        }
        lx[next[k]] = 1.0;
        ux[next[k]] = ukk;
        next[k] += 1;
    }
    let l = SparseMatrix::from_csc(n, n, lp.clone(), li.clone(), lx)?;
    let ut = SparseMatrix::from_csc(n, n, lp.clone(), li.clone(), ux)?;
    Ok(FactorBundle {
        kind: FactorKind::Lu,
        perm: sym.perm.clone(),
        stats: stats(a, l.nnz()),
        l,
        ut: Some(ut),
    })
}

/// Symbolic and numeric Cholesky in one call.
pub fn cholesky(a: &SparseMatrix, perm: &Permutation) -> Result<FactorBundle> {
    let sym = symbolic_cholesky(&SparsityPattern::from_matrix(a), perm)?;
    numeric_cholesky(a, &sym)
}

pub fn lu(a: &SparseMatrix, perm: &Permutation) -> Result<FactorBundle> {
    let sym = symbolic_cholesky(&SparsityPattern::from_matrix(a), perm)?;
    numeric_lu(a, &sym)
}

/// Solves `A x = b` from the factors of `P A Pᵀ`.
pub fn solve(f: &FactorBundle, b: &[f64]) -> Result<Vec<f64>> {
    let n = f.l.ncols();
    if b.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let mut w = f.perm.apply(b);
    // L w = P b
    for j in 0..n {
        let (rows, vals) = f.l.col(j);
        w[j] /= vals[0];
        let wj = w[j];
        for (&i, &v) in rows.iter().zip(vals).skip(1) {
            w[i] -= v * wj;
        }
    }
    // Lᵀ x = w or U x = w, with U stored transposed
    let r = f.ut.as_ref().unwrap_or(&f.l);
    for j in (0..n).rev() {
        let (rows, vals) = r.col(j);
        let mut s = w[j];
        for (&i, &v) in rows.iter().zip(vals).skip(1) {
            s -= v * w[i];
        }
        w[j] = s / vals[0];
    }
    Ok(f.perm.apply_inverse(&w))
}

/// `‖P A Pᵀ − L Lᵀ‖_max / ‖A‖_max` (or with `L U`).
pub fn reconstruction_error(f: &FactorBundle, a: &SparseMatrix) -> f64 {
    let n = a.ncols();
    let c = a.permute_symmetric(f.perm.forward());
    let r = f.ut.as_ref().unwrap_or(&f.l);
    // row access to L through its transpose
    let lt = f.l.transpose();
    let mut acc = vec![0.0; n];
    let mut worst = 0.0f64;
    for k in 0..n {
        // column k of L Rᵀ: Σ_j L(:, j) R(k, j)
        let (js, _) = lt.col(k);
        let mut touched = Vec::new();
        for &j in js {
            let rkj = r.get(k, j);
            let (rows, vals) = f.l.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                acc[i] += v * rkj;
                touched.push(i);
            }
        }
        let (rows, vals) = c.col(k);
        for (&i, &v) in rows.iter().zip(vals) {
            acc[i] -= v;
            touched.push(i);
        }
        for i in touched {
            worst = worst.max(acc[i].abs());
            acc[i] = 0.0;
        }
    }
    worst / a.max_abs()
}
