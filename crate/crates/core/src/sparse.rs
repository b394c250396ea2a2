//! Compressed-column real matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed-column matrix without explicit zeros; row indices are strictly
/// increasing within each column. `symmetric` marks matrices whose full
/// pattern and values are stored but which may be exported as one triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_unstable_by_key(|&(r, c, _)| (c, r));
        let mut colptr = vec![0; ncols + 1];
        let mut rowidx = Vec::with_capacity(trip.len());
        let mut values: Vec<f64> = Vec::with_capacity(trip.len());
        let mut cols: Vec<usize> = Vec::with_capacity(trip.len());
        for (r, c, v) in trip {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if let (Some(&lr), Some(&lc)) = (rowidx.last(), cols.last()) {
                if lr == r && lc == c {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            rowidx.push(r);
            cols.push(c);
            values.push(v);
        }
        let mut keep_r = Vec::with_capacity(rowidx.len());
        let mut keep_v = Vec::with_capacity(rowidx.len());
        for ((r, c), v) in rowidx.into_iter().zip(cols).zip(values) {
            if v != 0.0 {
                keep_r.push(r);
                keep_v.push(v);
                colptr[c + 1] += 1;
            }
        }
        for c in 0..ncols {
            colptr[c + 1] += colptr[c];
        }
        SparseMatrix {
            nrows,
            ncols,
            colptr,
            rowidx: keep_r,
            values: keep_v,
            symmetric: false,
        }
    }

    /// Builds directly from compressed-column arrays; rows must be sorted and
    /// values nonzero.
    pub fn from_csc(
        nrows: usize,
        ncols: usize,
        colptr: Vec<usize>,
        rowidx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if colptr.len() != ncols + 1 || rowidx.len() != values.len() || colptr[ncols] != rowidx.len()
        {
            return Err(Error::Dimension("inconsistent compressed-column arrays".into()));
        }
        for c in 0..ncols {
            let rows = &rowidx[colptr[c]..colptr[c + 1]];
            if rows.windows(2).any(|w| w[0] >= w[1]) || rows.iter().any(|&r| r >= nrows) {
                return Err(Error::Dimension(format!("column {c} has unsorted or invalid rows")));
            }
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            colptr,
            rowidx,
            values,
            symmetric: false,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SparseMatrix {
            nrows: n,
            ncols: n,
            colptr: (0..=n).collect(),
            rowidx: (0..n).collect(),
            values: vec![1.0; n],
            symmetric: false,
        };
        m.symmetric = true;
        m
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut trip = Vec::new();
        for c in 0..a.ncols() {
            for r in 0..a.nrows() {
                if a[(r, c)] != 0.0 {
                    trip.push((r, c, a[(r, c)]));
                }
            }
        }
        SparseMatrix::from_triplets(a.nrows(), a.ncols(), trip)
    }

    pub fn with_symmetric(mut self, symmetric: bool) -> Self {
        self.symmetric = symmetric;
        self
    }

    pub fn is_symmetric_flag(&self) -> bool {
        self.symmetric
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.rowidx.len()
    }

    /// Average number of nonzeros per row.
    pub fn anz(&self) -> f64 {
        self.nnz() as f64 / self.nrows as f64
    }

    pub fn colptr(&self) -> &[usize] {
        &self.colptr
    }

    pub fn rowidx(&self) -> &[usize] {
        &self.rowidx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values of column `c`.
    pub fn col(&self, c: usize) -> (&[usize], &[f64]) {
        let r = self.colptr[c]..self.colptr[c + 1];
        (&self.rowidx[r.clone()], &self.values[r])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (rows, vals) = self.col(c);
        match rows.binary_search(&r) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            let (rows, vals) = self.col(c);
            rows.iter().zip(vals).map(move |(&r, &v)| (r, c, v))
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::LengthMismatch {
                expected: self.ncols,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.nrows];
        for (c, &xc) in x.iter().enumerate() {
            if xc == 0.0 {
                continue;
            }
            let (rows, vals) = self.col(c);
            for (&r, &v) in rows.iter().zip(vals) {
                y[r] += v * xc;
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut count = vec![0usize; self.nrows + 1];
        for &r in &self.rowidx {
            count[r + 1] += 1;
        }
        for r in 0..self.nrows {
            count[r + 1] += count[r];
        }
        let colptr = count.clone();
        let mut next = count;
        let mut rowidx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for c in 0..self.ncols {
            let (rows, vals) = self.col(c);
            for (&r, &v) in rows.iter().zip(vals) {
                rowidx[next[r]] = c;
                values[next[r]] = v;
                next[r] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            colptr,
            rowidx,
            values,
            symmetric: self.symmetric,
        }
    }

    /// `α·self + β·other`, same shape.
    pub fn add_scaled(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> Result<SparseMatrix> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let trip = self
            .triplets()
            .map(|(r, c, v)| (r, c, alpha * v))
            .chain(other.triplets().map(|(r, c, v)| (r, c, beta * v)))
            .collect();
        Ok(SparseMatrix::from_triplets(self.nrows, self.ncols, trip)
            .with_symmetric(self.symmetric && other.symmetric))
    }

    /// Symmetric permutation `P A Pᵀ` where row/column `i` moves to `perm[i]`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> SparseMatrix {
        let trip = self
            .triplets()
            .map(|(r, c, v)| (perm[r], perm[c], v))
            .collect();
        SparseMatrix::from_triplets(self.nrows, self.ncols, trip).with_symmetric(self.symmetric)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            a[(r, c)] = v;
        }
        a
    }

    /// Largest `|a_ij − a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        for (r, c, v) in self.triplets() {
            worst = worst.max((v - t.get(r, c)).abs());
        }
        for (r, c, v) in t.triplets() {
            if self.get(r, c) == 0.0 {
                worst = worst.max(v.abs());
            }
        }
        worst
    }

    /// True when `(i, j)` stored ⟺ `(j, i)` stored.
    pub fn is_structurally_symmetric(&self) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let t = self.transpose();
        self.colptr == t.colptr && self.rowidx == t.rowidx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_sum_and_zeros_drop() {
        let m = SparseMatrix::from_triplets(
            3,
            3,
            vec![(0, 0, 1.0), (2, 0, 2.0), (0, 0, 1.0), (1, 1, 0.0), (1, 2, 3.0), (1, 2, -3.0)],
        );
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.get(2, 0), 2.0);
        assert_eq!(m.get(1, 2), 0.0);
    }

    #[test]
    fn identity_and_tridiagonal_anz() {
        assert_eq!(SparseMatrix::identity(100).anz(), 1.0);
        let mut t = Vec::new();
        for i in 0..4 {
            t.push((i, i, 2.0));
            if i + 1 < 4 {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        assert_eq!(SparseMatrix::from_triplets(4, 4, t).anz(), 2.5);
    }

    #[test]
    fn transpose_and_matvec() {
        let m = SparseMatrix::from_triplets(2, 3, vec![(0, 1, 2.0), (1, 2, 3.0), (1, 0, 1.0)]);
        let t = m.transpose();
        assert_eq!(t.nrows(), 3);
        assert_eq!(t.get(1, 0), 2.0);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]).unwrap(), vec![2.0, 4.0]);
        assert!(m.matvec(&[1.0]).is_err());
    }

    #[test]
    fn symmetric_permutation_moves_entries() {
        let m = SparseMatrix::from_triplets(3, 3, vec![(0, 1, 5.0), (1, 0, 5.0), (2, 2, 1.0)]);
        let p = m.permute_symmetric(&[2, 0, 1]);
        assert_eq!(p.get(2, 0), 5.0);
        assert_eq!(p.get(0, 2), 5.0);
        assert_eq!(p.get(1, 1), 1.0);
        assert!(p.is_structurally_symmetric());
    }
}
