//! Complex dense/sparse primitives: factorization-based solves,
//! orthogonalization, extremal singular values and Matrix Market I/O.

pub mod lu;
pub mod mtx;
pub mod orth;
pub mod sparse;
pub mod svd;

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64 as C64;

pub use lu::{BandedLu, DenseLu, Op};
pub use orth::{hstack, orth, real_split, BasisMatrix};
pub use sparse::SparseMatrix;
pub use svd::{extremal_singular_values, DEFAULT_SVD_CAP};

use crate::error::{Error, Result};

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Sparse inputs below this order are factorized densely.
pub const DENSE_FALLBACK_BELOW: usize = 500;

/// A complex matrix in dense or compressed sparse storage.
#[derive(Debug, Clone, PartialEq)]
pub enum ComplexMatrix {
    Dense(CMat),
    Sparse(SparseMatrix),
}

impl ComplexMatrix {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            ComplexMatrix::Dense(m) => (m.nrows(), m.ncols()),
            ComplexMatrix::Sparse(m) => (m.nrows(), m.ncols()),
        }
    }

    pub fn nrows(&self) -> usize {
        self.shape().0
    }

    pub fn ncols(&self) -> usize {
        self.shape().1
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, ComplexMatrix::Sparse(_))
    }

    pub fn to_dense(&self) -> CMat {
        match self {
            ComplexMatrix::Dense(m) => m.clone(),
            ComplexMatrix::Sparse(m) => m.to_dense(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            ComplexMatrix::Dense(m) => m.iter().map(|v| v.norm()).fold(0.0, f64::max),
            ComplexMatrix::Sparse(m) => m.max_abs(),
        }
    }

    /// `Y += alpha * A X`.
    pub fn mul_add(&self, alpha: C64, x: &CMat, y: &mut CMat) {
        match self {
            ComplexMatrix::Dense(m) => y.gemm(alpha, m, x, C64::new(1.0, 0.0)),
            ComplexMatrix::Sparse(m) => m.mul_add_mat(alpha, x, y),
        }
    }

    /// `Y += alpha * op(A) X` for `op` in {transpose, adjoint}.
    pub fn mul_add_transposed(&self, alpha: C64, x: &CMat, y: &mut CMat, op: Op) {
        match (self, op) {
            (_, Op::Plain) => self.mul_add(alpha, x, y),
            (ComplexMatrix::Dense(m), Op::Transpose) => y.gemm_tr(alpha, m, x, C64::new(1.0, 0.0)),
            (ComplexMatrix::Dense(m), Op::Adjoint) => y.gemm_ad(alpha, m, x, C64::new(1.0, 0.0)),
            (ComplexMatrix::Sparse(m), op) => {
                for (xc, mut yc) in x.column_iter().zip(y.column_iter_mut()) {
                    m.mul_add_vec_transpose(alpha, xc.as_slice(), yc.as_mut_slice(), op == Op::Adjoint);
                }
            }
        }
    }

    pub fn mul(&self, x: &CMat) -> CMat {
        let mut y = CMat::zeros(self.nrows(), x.ncols());
        self.mul_add(C64::new(1.0, 0.0), x, &mut y);
        y
    }
}

/// A reusable solver for `A x = y`, `Aᵀ x = y` and `Aᴴ x = y`.
#[derive(Debug, Clone)]
pub enum Factorization {
    Dense(DenseLu),
    Banded(BandedLu),
}

impl Factorization {
    pub fn dim(&self) -> usize {
        match self {
            Factorization::Dense(f) => f.dim(),
            Factorization::Banded(f) => f.dim(),
        }
    }

    pub fn solve_in_place(&self, b: &mut [C64], op: Op) {
        match self {
            Factorization::Dense(f) => f.solve_in_place(b, op),
            Factorization::Banded(f) => f.solve_in_place(b, op),
        }
    }

    fn solve_op(&self, b: &CMat, op: Op) -> CMat {
        assert_eq!(b.nrows(), self.dim(), "rhs rows");
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            self.solve_in_place(col.as_mut_slice(), op);
        }
        x
    }

    pub fn solve(&self, b: &CMat) -> CMat {
        self.solve_op(b, Op::Plain)
    }

    pub fn solve_transpose(&self, b: &CMat) -> CMat {
        self.solve_op(b, Op::Transpose)
    }

    pub fn solve_adjoint(&self, b: &CMat) -> CMat {
        self.solve_op(b, Op::Adjoint)
    }
}

/// LU factorization of a square matrix; sparse inputs of order at least
/// [`DENSE_FALLBACK_BELOW`] go through the banded solver.
pub fn factorize(a: &ComplexMatrix) -> Result<Factorization> {
    let (r, c) = a.shape();
    if r != c {
        return Err(Error::mismatch("factorize", "square matrix", format!("{r}x{c}")));
    }
    match a {
        ComplexMatrix::Dense(m) => DenseLu::factor(m).map(Factorization::Dense),
        ComplexMatrix::Sparse(m) if r < DENSE_FALLBACK_BELOW => {
            DenseLu::factor(&m.to_dense()).map(Factorization::Dense)
        }
        ComplexMatrix::Sparse(m) => BandedLu::factor(m).map(Factorization::Banded),
    }
}

/// Factorization of a small dense (reduced) matrix; singularity is reported
/// as [`Error::SingularReducedMatrix`].
pub fn factorize_reduced(a: &CMat) -> Result<DenseLu> {
    DenseLu::factor(a).map_err(Error::into_reduced)
}

/// Solves with a reduced factorization for every column of `b`.
pub fn solve_reduced(lu: &DenseLu, b: &CMat, op: Op) -> CMat {
    let mut x = b.clone();
    for mut col in x.column_iter_mut() {
        lu.solve_in_place(col.as_mut_slice(), op);
    }
    x
}
