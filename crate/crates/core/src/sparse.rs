//! Compressed sparse row matrices and sparse × dense products.
//!
//! Dense operands are `nalgebra::DMatrix<f64>`, which is column-major; the
//! product is computed one output column at a time, so every column is an
//! independent task and the summation order inside a row never depends on
//! the number of worker threads.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Result, SpicError};

/// Below this many output entries the product runs on the calling thread.
const PAR_THRESHOLD: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays. Column indices inside each row
    /// must be strictly increasing.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != n_rows + 1 || indptr[0] != 0 {
            return Err(SpicError::InvalidInput(format!(
                "indptr must have {} entries starting at 0",
                n_rows + 1
            )));
        }
        if indices.len() != values.len() || *indptr.last().unwrap() != indices.len() {
            return Err(SpicError::InvalidInput(
                "indptr, indices and values disagree on nnz".into(),
            ));
        }
        for r in 0..n_rows {
            let (lo, hi) = (indptr[r], indptr[r + 1]);
            if lo > hi {
                return Err(SpicError::InvalidInput(format!("indptr decreases at row {r}")));
            }
            let row = &indices[lo..hi];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SpicError::InvalidInput(format!(
                    "column indices of row {r} are not strictly increasing"
                )));
            }
            if row.last().is_some_and(|&c| c >= n_cols) {
                return Err(SpicError::InvalidInput(format!("column index out of range in row {r}")));
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        })
    }

    /// Builds from (row, col, value) triplets. Duplicate positions keep the
    /// first value seen.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        // stable: the first occurrence of a duplicate stays first
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        sorted.dedup_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; n_rows + 1];
        for &(r, c, _) in &sorted {
            if r >= n_rows || c >= n_cols {
                return Err(SpicError::InvalidInput(format!(
                    "entry ({r}, {c}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
            indptr[r + 1] += 1;
        }
        for r in 0..n_rows {
            indptr[r + 1] += indptr[r];
        }
        let indices = sorted.iter().map(|t| t.1).collect();
        let values = sorted.iter().map(|t| t.2).collect();
        Ok(Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.n_rows
    }

    pub fn ncols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).ok().map(|p| vals[p])
    }

    /// Same sparsity pattern, new values (one per stored entry).
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.nnz(), "value count must match nnz");
        Self { values, ..self.clone() }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.n_cols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let slot = next[c];
                indices[slot] = r;
                values[slot] = v;
                next[c] += 1;
            }
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            indptr,
            indices,
            values,
        }
    }

    /// Largest |A_ij − A_ji| over the union of both patterns; `f64::INFINITY`
    /// for non-square matrices.
    pub fn max_asymmetry(&self) -> f64 {
        if self.n_rows != self.n_cols {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let mirror = self.get(c, r).unwrap_or(0.0);
                worst = worst.max((v - mirror).abs());
            }
        }
        worst
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[(r, c)] = v;
            }
        }
        out
    }

    /// `shift · X + A · X`.
    pub fn shifted_mul_dense(&self, shift: f64, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(self.n_cols, x.nrows(), "sparse product: inner dimensions differ");
        assert!(
            shift == 0.0 || self.n_rows == self.n_cols,
            "a shifted product needs a square matrix"
        );
        let mut out = DMatrix::zeros(self.n_rows, x.ncols());
        if self.n_rows == 0 || x.ncols() == 0 {
            return out;
        }
        let n_in = x.nrows();
        let src = x.as_slice();
        let column = |j: usize, dst: &mut [f64]| {
            let xj = &src[j * n_in..(j + 1) * n_in];
            for (r, slot) in dst.iter_mut().enumerate() {
                let (cols, vals) = self.row(r);
                let mut acc = 0.0;
                for (&c, &v) in cols.iter().zip(vals) {
                    acc += v * xj[c];
                }
                *slot = if shift != 0.0 { acc + shift * xj[r] } else { acc };
            }
        };
        let chunk = self.n_rows;
        if self.n_rows * x.ncols() < PAR_THRESHOLD {
            for (j, dst) in out.as_mut_slice().chunks_mut(chunk).enumerate() {
                column(j, dst);
            }
        } else {
            out.as_mut_slice()
                .par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(j, dst)| column(j, dst));
        }
        out
    }

    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.shifted_mul_dense(0.0, x)
    }

    /// Same sparsity pattern as `other` (identical row structure).
    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.indptr == other.indptr
            && self.indices == other.indices
    }

    /// Every stored position of `self` is also stored in `other`.
    pub fn pattern_within(&self, other: &CsrMatrix) -> bool {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return false;
        }
        (0..self.n_rows).all(|r| {
            let (theirs, _) = other.row(r);
            self.row(r).0.iter().all(|c| theirs.binary_search(c).is_ok())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix {
        // [[1, 0, 2],
        //  [0, 3, 0],
        //  [4, 0, 5]]
        CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0), (2, 0, 4.0), (2, 2, 5.0)]).unwrap()
    }

    #[test]
    fn triplets_keep_first_duplicate() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 1, 7.0), (0, 1, 9.0)]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), Some(7.0));
    }

    #[test]
    fn transpose_and_asymmetry() {
        let m = sample();
        let t = m.transpose();
        assert_eq!(t.to_dense(), m.to_dense().transpose());
        assert_eq!(m.max_asymmetry(), 2.0);
        assert_eq!(CsrMatrix::identity(4).max_asymmetry(), 0.0);
    }

    #[test]
    fn product_matches_dense() {
        let m = sample();
        let x = DMatrix::from_row_slice(3, 2, &[1.0, -1.0, 0.5, 2.0, -3.0, 4.0]);
        let got = m.shifted_mul_dense(2.0, &x);
        let want = (m.to_dense() + DMatrix::identity(3, 3) * 2.0) * &x;
        assert!((got - want).abs().max() < 1e-15);
    }

    #[test]
    fn rejects_unsorted_rows() {
        let err = CsrMatrix::new(1, 3, vec![0, 2], vec![2, 0], vec![1.0, 1.0]);
        assert!(err.is_err());
    }

    #[test]
    fn parallel_path_is_deterministic() {
        let n = 300;
        let trip: Vec<_> = (0..n)
            .flat_map(|i| [(i, i, 0.5), (i, (i * 7 + 3) % n, 0.25), (i, (i * 13 + 1) % n, 0.125)])
            .collect();
        let m = CsrMatrix::from_triplets(n, n, &trip).unwrap();
        let x = DMatrix::from_fn(n, 80, |i, j| ((i * 31 + j * 17) % 11) as f64 / 11.0);
        let a = m.mul_dense(&x);
        let b = m.mul_dense(&x);
        assert_eq!(a, b);
        let dense = m.to_dense() * &x;
        assert!((a - dense).abs().max() < 1e-12);
    }
}
