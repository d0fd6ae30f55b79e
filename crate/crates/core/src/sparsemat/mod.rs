//! Sparse storage with simultaneous row-major and column-major access.
//!
//! Walks sample the next state from a row while the estimators extract whole
//! columns, so both orientations are kept resident.

mod loader;

pub use loader::{load_graph, write_edge_list, GraphFormat, GraphOptions, GraphSource, LoadedGraph};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square sparse matrix held in CSR and CSC form at once.
///
/// Within each row (column) entries are sorted by column (row) index; there
/// are no duplicates and no explicit zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    row_cols: Vec<usize>,
    row_vals: Vec<f64>,
    col_ptr: Vec<usize>,
    col_rows: Vec<usize>,
    col_vals: Vec<f64>,
    symmetric_hint: bool,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets.
    ///
    /// Duplicate coordinates are summed and entries that end up exactly zero
    /// are dropped.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("entry ({i}, {j}) outside a {n}x{n} matrix")));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite value at ({i}, {j})")));
            }
            entries.push((i, j, v));
        }
        entries.sort_unstable_by_key(|e| (e.0, e.1));

        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);
        Ok(Self::from_sorted_unique(n, &merged, false))
    }

    /// Dense row-major input; convenient for small fixtures.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("dense input must be square"));
        }
        let trip = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, v)))
            .filter(|e| e.2 != 0.0);
        Self::from_triplets(n, trip)
    }

    /// The `n x n` zero matrix.
    pub fn zeros(n: usize) -> Self {
        Self::from_sorted_unique(n, &[], false)
    }

    // `entries` must be sorted by (row, col), unique and free of zeros.
    fn from_sorted_unique(n: usize, entries: &[(usize, usize, f64)], symmetric_hint: bool) -> Self {
        let nnz = entries.len();
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_ptr = vec![0usize; n + 1];
        for &(i, j, _) in entries {
            row_ptr[i + 1] += 1;
            col_ptr[j + 1] += 1;
        }
        for k in 0..n {
            row_ptr[k + 1] += row_ptr[k];
            col_ptr[k + 1] += col_ptr[k];
        }
        let row_cols = entries.iter().map(|e| e.1).collect();
        let row_vals = entries.iter().map(|e| e.2).collect();

        // Row-sorted input scattered by column stays sorted by row within each column.
        let mut col_rows = vec![0usize; nnz];
        let mut col_vals = vec![0f64; nnz];
        let mut next = col_ptr.clone();
        for &(i, j, v) in entries {
            let slot = next[j];
            col_rows[slot] = i;
            col_vals[slot] = v;
            next[j] += 1;
        }

        SparseMatrix {
            n,
            row_ptr,
            row_cols,
            row_vals,
            col_ptr,
            col_rows,
            col_vals,
            symmetric_hint,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nnz() == 0
    }

    /// True when the matrix was built from an undirected graph.
    pub fn symmetric_hint(&self) -> bool {
        self.symmetric_hint
    }

    pub(crate) fn with_symmetric_hint(mut self, hint: bool) -> Self {
        self.symmetric_hint = hint;
        self
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.row_cols[range.clone()], &self.row_vals[range])
    }

    /// Row indices and values of column `j`.
    #[inline]
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.col_rows[range.clone()], &self.col_vals[range])
    }

    #[inline]
    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    #[inline]
    pub fn col_nnz(&self, j: usize) -> usize {
        self.col_ptr[j + 1] - self.col_ptr[j]
    }

    /// Offset of row `i` into the flat CSR arrays.
    #[inline]
    pub(crate) fn row_offset(&self, i: usize) -> usize {
        self.row_ptr[i]
    }

    /// Value at `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Row-major enumeration of all stored triplets.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// Triplets read back through the column-major index, sorted row-major.
    pub fn triplets_from_columns(&self) -> Vec<(usize, usize, f64)> {
        let mut out: Vec<_> = (0..self.n)
            .flat_map(|j| {
                let (rows, vals) = self.col(j);
                rows.iter().zip(vals).map(move |(&i, &v)| (i, j, v))
            })
            .collect();
        out.sort_unstable_by_key(|e| (e.0, e.1));
        out
    }

    /// Both indices describe the same triplet set.
    pub fn is_transpose_consistent(&self) -> bool {
        self.triplets().eq(self.triplets_from_columns())
    }

    /// Exact value symmetry, `a_ij == a_ji` for every stored entry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            let (rc, rv) = self.row(i);
            let (cr, cv) = self.col(i);
            rc == cr && rv == cv
        })
    }

    /// Every stored value multiplied by `gamma`.
    pub fn scale(&self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!(
                "scaling factor must be positive and finite, got {gamma}"
            )));
        }
        let mut out = self.clone();
        out.row_vals.iter_mut().for_each(|v| *v *= gamma);
        out.col_vals.iter_mut().for_each(|v| *v *= gamma);
        Ok(out)
    }

    /// `Σ_j |a_ij|` for every row.
    pub fn row_abs_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum())
            .collect()
    }

    /// Maximum absolute row sum, i.e. the induced infinity norm.
    pub fn norm_inf(&self) -> f64 {
        self.row_abs_sums().into_iter().fold(0.0, f64::max)
    }

    /// Euclidean norm of every column.
    pub fn col_norms(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| self.col(j).1.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    /// Number of stored entries per row (the out-degree for adjacency matrices).
    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.row_nnz(i)).collect()
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "vector length must match matrix dimension");
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &a)| a * x[j]).sum()
            })
            .collect()
    }

    /// Splits outgoing and incoming edges of a digraph into the bipartite
    /// block matrix `[[0, A], [Aᵀ, 0]]` of dimension `2n`.
    ///
    /// Rows `0..n` carry the out-edges, rows `n..2n` the in-edges.
    pub fn symmetrize_digraph(&self) -> Self {
        let n = self.n;
        let mut entries = Vec::with_capacity(2 * self.nnz());
        for i in 0..n {
            let (cols, vals) = self.row(i);
            entries.extend(cols.iter().zip(vals).map(|(&j, &v)| (i, n + j, v)));
        }
        for j in 0..n {
            // Row n + j of the lower block is column j of A.
            let (rows, vals) = self.col(j);
            entries.extend(rows.iter().zip(vals).map(|(&i, &v)| (n + j, i, v)));
        }
        Self::from_sorted_unique(2 * n, &entries, true)
    }
}
