//! Compressed sparse row storage for complex matrices.

use super::{CMat, C64};
use crate::error::{Error, Result};

/// Complex CSR matrix. Column indices are sorted within each row and no
/// `(row, col)` pair appears twice; duplicates are summed on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        for &(i, j, _) in &entries {
            if i >= nrows || j >= ncols {
                return Err(Error::mismatch(
                    "sparse triplet",
                    format!("index < ({nrows}, {ncols})"),
                    format!("({i}, {j})"),
                ));
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<C64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_dense(m: &CMat) -> Self {
        let triplets = (0..m.nrows()).flat_map(|i| {
            (0..m.ncols()).filter_map(move |j| {
                let v = m[(i, j)];
                (v != C64::new(0.0, 0.0)).then_some((i, j, v))
            })
        });
        Self::from_triplets(m.nrows(), m.ncols(), triplets).expect("indices in range")
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, C64::new(1.0, 0.0)))).unwrap()
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

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Iterates stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Same sparsity pattern, new values (one per stored entry).
    pub fn with_values(&self, values: Vec<C64>) -> Self {
        assert_eq!(values.len(), self.values.len(), "value count must match the pattern");
        Self {
            values,
            ..self.clone_pattern()
        }
    }

    fn clone_pattern(&self) -> Self {
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: Vec::new(),
        }
    }

    /// Position of `(i, j)` in [`SparseMatrix::values`], if stored.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn scaled(&self, alpha: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols
            && self
                .triplets()
                .all(|(i, j, v)| (self.get(j, i) - v).norm() <= tol * v.norm().max(1.0))
    }

    /// `y += alpha * A x` for a single vector.
    pub fn mul_add_vec(&self, alpha: C64, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi += alpha * acc;
        }
    }

    /// `y += alpha * op(A) x` where `op` is the transpose, optionally conjugated.
    pub fn mul_add_vec_transpose(&self, alpha: C64, x: &[C64], y: &mut [C64], conjugate: bool) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for (i, &xi) in x.iter().enumerate() {
            let axi = alpha * xi;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = if conjugate { self.values[k].conj() } else { self.values[k] };
                y[self.col_idx[k]] += a * axi;
            }
        }
    }

    /// `Y += alpha * A X` column by column.
    pub fn mul_add_mat(&self, alpha: C64, x: &CMat, y: &mut CMat) {
        for (xc, mut yc) in x.column_iter().zip(y.column_iter_mut()) {
            self.mul_add_vec(alpha, xc.as_slice(), yc.as_mut_slice());
        }
    }

    pub fn mul_mat(&self, x: &CMat) -> CMat {
        let mut y = CMat::zeros(self.nrows, x.ncols());
        self.mul_add_mat(C64::new(1.0, 0.0), x, &mut y);
        y
    }
}
