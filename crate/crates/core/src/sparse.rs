//! Sparse matrix containers shared by the census, normalization and tensor code.
//!
//! [`SparseCountMatrix`] is the sorted-COO form used for motif counts and for
//! serialization. [`CsrMatrix`] is the row-compressed form used in products.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("entry ({row}, {col}) lies outside a {dim}x{dim} matrix")]
    OutOfBounds { row: usize, col: usize, dim: usize },
    #[error("duplicate entry at ({row}, {col})")]
    Duplicate { row: usize, col: usize },
    #[error("entry ({row}, {col}) has invalid value {value}; counts must be finite and >= 0")]
    InvalidValue { row: usize, col: usize, value: f64 },
}

/// Square nonnegative matrix stored as sorted `(row, col, value)` triplets.
///
/// Zero values are never stored, so two matrices are equal exactly when their
/// entry lists are equal.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCountMatrix {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseCountMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Builds a matrix from unsorted triplets. Duplicates are rejected and
    /// explicit zeros are dropped.
    pub fn from_triplets(
        dim: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, SparseError> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (row, col, value) in triplets {
            if row >= dim || col >= dim {
                return Err(SparseError::OutOfBounds { row, col, dim });
            }
            if !value.is_finite() || value < 0.0 {
                return Err(SparseError::InvalidValue { row, col, value });
            }
            entries.push((row, col, value));
        }
        entries.sort_by_key(|a| (a.0, a.1));
        for w in entries.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(SparseError::Duplicate {
                    row: w[0].0,
                    col: w[0].1,
                });
            }
        }
        entries.retain(|e| e.2 != 0.0);
        Ok(Self { dim, entries })
    }

    /// Builds a matrix from an accumulated `(row, col) -> value` map.
    pub fn from_map(dim: usize, map: BTreeMap<(usize, usize), f64>) -> Result<Self, SparseError> {
        Self::from_triplets(dim, map.into_iter().map(|((r, c), v)| (r, c, v)))
    }

    /// Sums repeated coordinates. Used by the census paths, which produce
    /// one contribution per instance or per rule and may hit a pair many times.
    pub(crate) fn from_summed_triplets(dim: usize, triplets: Vec<(usize, usize, f64)>) -> Self {
        let csr = CsrMatrix::from_unsorted_triplets(dim, dim, triplets);
        let mut entries = Vec::with_capacity(csr.nnz());
        for i in 0..dim {
            entries.extend(csr.row(i).map(|(j, v)| (i, j, v)));
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(row, col)))
            .map(|i| self.entries[i].2)
            .unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn transpose(&self) -> Self {
        let mut entries: Vec<_> = self.entries.iter().map(|&(r, c, v)| (c, r, v)).collect();
        entries.sort_by_key(|a| (a.0, a.1));
        Self {
            dim: self.dim,
            entries,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.transpose() == *self
    }

    /// Row sums, the diagonal of the degree matrix.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.dim];
        for &(r, _, v) in &self.entries {
            sums[r] += v;
        }
        sums
    }

    /// Returns a copy with every entry multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .map(|&(r, c, v)| (r, c, v * factor))
                .collect(),
        }
    }

    /// Applies a node relabeling: entry `(i, j)` moves to `(perm[i], perm[j])`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut entries: Vec<_> = self
            .entries
            .iter()
            .map(|&(r, c, v)| (perm[r], perm[c], v))
            .collect();
        entries.sort_by_key(|a| (a.0, a.1));
        Self {
            dim: self.dim,
            entries,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.dim]; self.dim];
        for &(r, c, v) in &self.entries {
            out[r][c] = v;
        }
        out
    }

    /// First `(row, col, self, other)` where the two matrices disagree.
    pub fn first_difference(&self, other: &Self) -> Option<(usize, usize, f64, f64)> {
        let mut keys: Vec<(usize, usize)> = self
            .entries
            .iter()
            .chain(other.entries.iter())
            .map(|e| (e.0, e.1))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys.into_iter().find_map(|(r, c)| {
            let (a, b) = (self.get(r, c), other.get(r, c));
            (a != b).then_some((r, c, a, b))
        })
    }

    pub fn to_csr(&self) -> CsrMatrix {
        CsrMatrix::from_sorted_triplets(self.dim, self.dim, &self.entries)
    }
}

/// Compressed sparse row matrix of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Triplets must be sorted by `(row, col)` without duplicates.
    pub fn from_sorted_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut row_ptr = vec![0usize; nrows + 1];
        for &(r, _, _) in triplets {
            row_ptr[r + 1] += 1;
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx: triplets.iter().map(|t| t.1).collect(),
            values: triplets.iter().map(|t| t.2).collect(),
        }
    }

    /// Sorts and sums duplicate triplets, dropping exact zeros.
    pub fn from_unsorted_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for t in triplets {
            match merged.last_mut() {
                Some(last) if (last.0, last.1) == (t.0, t.1) => last.2 += t.2,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.2 != 0.0);
        Self::from_sorted_triplets(nrows, ncols, &merged)
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_sorted_triplets(nrows, ncols, &[])
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_sorted_triplets(n, n, &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(col, value)` pairs of row `i`, in increasing column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Row index of every stored entry, aligned with `values()`.
    pub fn row_of_entries(&self) -> Vec<usize> {
        let mut rows = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            rows.extend(std::iter::repeat(i).take(self.row_nnz(i)));
        }
        rows
    }

    /// Same sparsity pattern with every value replaced.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.nnz(), "value count must match nnz");
        Self {
            values,
            ..self.clone()
        }
    }

    /// Keeps only the rows listed in `keep`; other rows become empty.
    pub fn retain_rows(&self, keep: impl Fn(usize) -> bool) -> Self {
        let mut triplets = Vec::new();
        for i in 0..self.nrows {
            if keep(i) {
                triplets.extend(self.row(i).map(|(j, v)| (i, j, v)));
            }
        }
        Self::from_sorted_triplets(self.nrows, self.ncols, &triplets)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// Block-diagonal stack of several matrices.
    pub fn block_diagonal(blocks: &[&CsrMatrix]) -> Self {
        let nrows = blocks.iter().map(|b| b.nrows).sum();
        let ncols = blocks.iter().map(|b| b.ncols).sum();
        let mut triplets = Vec::new();
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for i in 0..b.nrows {
                triplets.extend(b.row(i).map(|(j, v)| (r0 + i, c0 + j, v)));
            }
            r0 += b.nrows;
            c0 += b.ncols;
        }
        Self::from_sorted_triplets(nrows, ncols, &triplets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_rejected() {
        let err = SparseCountMatrix::from_triplets(3, [(0, 1, 1.0), (0, 1, 2.0)]).unwrap_err();
        assert_eq!(err, SparseError::Duplicate { row: 0, col: 1 });
    }

    #[test]
    fn negative_and_out_of_range_entries_are_rejected() {
        assert!(matches!(
            SparseCountMatrix::from_triplets(2, [(0, 1, -1.0)]),
            Err(SparseError::InvalidValue { .. })
        ));
        assert!(matches!(
            SparseCountMatrix::from_triplets(2, [(2, 0, 1.0)]),
            Err(SparseError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn zeros_are_not_stored() {
        let m = SparseCountMatrix::from_triplets(2, [(0, 1, 0.0), (1, 0, 3.0)]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(1, 0), 3.0);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn csr_rows_and_products() {
        let m = SparseCountMatrix::from_triplets(3, [(0, 2, 2.0), (0, 0, 1.0), (2, 1, 4.0)])
            .unwrap()
            .to_csr();
        assert_eq!(m.row(0).collect::<Vec<_>>(), vec![(0, 1.0), (2, 2.0)]);
        assert_eq!(m.row_nnz(1), 0);
        assert_eq!(m.mul_vec(&[1.0, 2.0, 3.0]), vec![7.0, 0.0, 8.0]);
        assert_eq!(m.row_of_entries(), vec![0, 0, 2]);
    }

    #[test]
    fn block_diagonal_offsets_blocks() {
        let a = CsrMatrix::identity(2);
        let b = CsrMatrix::from_sorted_triplets(1, 1, &[(0, 0, 5.0)]);
        let d = CsrMatrix::block_diagonal(&[&a, &b]);
        assert_eq!(d.get(2, 2), 5.0);
        assert_eq!(d.get(1, 1), 1.0);
        assert_eq!(d.nnz(), 3);
    }
}
