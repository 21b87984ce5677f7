//! Orthonormal bases built by modified Gram-Schmidt with one
//! re-orthogonalization pass.

use super::{CMat, CVec, C64};
use crate::error::{Error, Result};

/// A column is dropped when its norm after projection falls below this
/// fraction of its norm before projection.
pub const DROP_TOLERANCE: f64 = 1e-10;

/// An ordered set of length-`n` columns, flagged when known orthonormal.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    columns: CMat,
    orthonormal: bool,
}

impl BasisMatrix {
    /// Wraps arbitrary columns without orthonormalizing them.
    pub fn from_columns(columns: CMat) -> Self {
        Self {
            columns,
            orthonormal: false,
        }
    }

    /// Wraps columns the caller guarantees are orthonormal.
    ///
    /// Checked in debug builds only.
    pub fn from_orthonormal(columns: CMat) -> Self {
        let basis = Self {
            columns,
            orthonormal: true,
        };
        debug_assert!(basis.gram_defect() <= 1e-8, "columns are not orthonormal");
        basis
    }

    /// Flags the columns orthonormal when `‖QᴴQ − I‖_F ≤ 1e-10·√cols`.
    pub fn checked(columns: CMat) -> Self {
        let mut basis = Self::from_columns(columns);
        basis.orthonormal = basis.gram_defect() <= 1e-10 * (basis.ncols().max(1) as f64).sqrt();
        basis
    }

    /// The `n × 0` basis that greedy loops start from.
    pub fn empty(n: usize) -> Self {
        Self {
            columns: CMat::zeros(n, 0),
            orthonormal: true,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_orthonormal(CMat::identity(n, n))
    }

    pub fn matrix(&self) -> &CMat {
        &self.columns
    }

    pub fn into_matrix(self) -> CMat {
        self.columns
    }

    pub fn nrows(&self) -> usize {
        self.columns.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    /// `‖QᴴQ − I‖_F`.
    pub fn gram_defect(&self) -> f64 {
        let k = self.ncols();
        (self.columns.ad_mul(&self.columns) - CMat::identity(k, k)).norm()
    }

    pub fn is_real(&self) -> bool {
        self.columns.iter().all(|v| v.im == 0.0)
    }

    /// Relative distance of `x` from the span, `‖(I − QQᴴ)x‖ / ‖x‖`.
    ///
    /// Only meaningful for an orthonormal basis.
    pub fn relative_distance(&self, x: &CMat) -> f64 {
        let xn = x.norm();
        if xn == 0.0 {
            return 0.0;
        }
        let coeffs = self.columns.ad_mul(x);
        (x - &self.columns * coeffs).norm() / xn
    }

    /// `orth([self, extra])`: appends the part of each new column orthogonal
    /// to the current span.
    pub fn extend(&self, extra: &CMat) -> Result<BasisMatrix> {
        if extra.nrows() != self.nrows() && self.ncols() > 0 {
            return Err(Error::mismatch("basis extension", self.nrows(), extra.nrows()));
        }
        let base = if self.orthonormal {
            self.columns.column_iter().map(|c| c.into_owned()).collect()
        } else {
            gram_schmidt(Vec::new(), self.columns.column_iter().map(|c| c.into_owned()))
        };
        let cols = gram_schmidt(base, extra.column_iter().map(|c| c.into_owned()));
        assemble(cols)
    }
}

fn assemble(cols: Vec<CVec>) -> Result<BasisMatrix> {
    if cols.is_empty() {
        return Err(Error::EmptyBasis);
    }
    Ok(BasisMatrix {
        columns: CMat::from_columns(&cols),
        orthonormal: true,
    })
}

fn project_out(q: &[CVec], v: &mut CVec) {
    for qk in q {
        let c = qk.dotc(v);
        v.axpy(-c, qk, C64::new(1.0, 0.0));
    }
}

fn gram_schmidt(mut q: Vec<CVec>, candidates: impl Iterator<Item = CVec>) -> Vec<CVec> {
    for mut v in candidates {
        let before = v.norm();
        if before == 0.0 {
            continue;
        }
        project_out(&q, &mut v);
        project_out(&q, &mut v);
        let after = v.norm();
        if after < DROP_TOLERANCE * before {
            continue;
        }
        v.unscale_mut(after);
        q.push(v);
    }
    q
}

/// Orthonormal basis of the column space of `m`; numerically dependent
/// columns are dropped.
pub fn orth(m: &CMat) -> Result<BasisMatrix> {
    let cols = gram_schmidt(Vec::new(), m.column_iter().map(|c| c.into_owned()));
    assemble(cols)
}

/// Real basis `orth([Re V, Im V])` spanning the real and imaginary parts of
/// every column of `v`.
pub fn real_split(v: &BasisMatrix) -> Result<BasisMatrix> {
    let m = v.matrix();
    let (n, r) = (m.nrows(), m.ncols());
    let mut stacked = CMat::zeros(n, 2 * r);
    for j in 0..r {
        for i in 0..n {
            stacked[(i, j)] = C64::new(m[(i, j)].re, 0.0);
            stacked[(i, r + j)] = C64::new(m[(i, j)].im, 0.0);
        }
    }
    orth(&stacked)
}

/// Column-wise concatenation.
pub fn hstack(a: &CMat, b: &CMat) -> CMat {
    if a.ncols() == 0 {
        return b.clone();
    }
    if b.ncols() == 0 {
        return a.clone();
    }
    assert_eq!(a.nrows(), b.nrows(), "hstack row mismatch");
    let mut out = CMat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}
