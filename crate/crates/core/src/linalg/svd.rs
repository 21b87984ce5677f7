//! Extremal singular values.
//!
//! [`extremal_singular_values`] is a dense SVD and refuses matrices above a
//! size cap. For large sparse operators the extremal values are obtained from
//! Lanczos iterations on `AᴴA` (largest) or on `(AᴴA)⁻¹` through an existing
//! factorization (smallest).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::lu::Op;
use super::{CVec, ComplexMatrix, Factorization, C64};
use crate::error::{Error, Result};

/// Largest dimension accepted by the dense SVD.
pub const DEFAULT_SVD_CAP: usize = 5000;

/// `(σ_min, σ_max)` of a square matrix via dense SVD.
pub fn extremal_singular_values(a: &ComplexMatrix, cap: usize) -> Result<(f64, f64)> {
    let (r, c) = a.shape();
    if r != c {
        return Err(Error::mismatch("singular values", "square matrix", format!("{r}x{c}")));
    }
    if r > cap {
        return Err(Error::DimensionTooLarge { n: r, cap });
    }
    if r == 0 {
        return Ok((0.0, 0.0));
    }
    let sv = a.to_dense().singular_values();
    Ok((sv.min(), sv.max()))
}

/// Outcome of a Lanczos run.
#[derive(Debug, Clone, Copy)]
pub struct LanczosEstimate {
    pub value: f64,
    pub steps: usize,
    pub converged: bool,
}

/// Largest eigenvalue of a Hermitian positive semi-definite operator by
/// Lanczos with full re-orthogonalization.
///
/// Stops once the Ritz residual `β_k |s_k|` drops below `rel_tol · θ`.
pub fn lanczos_largest(
    n: usize,
    mut apply: impl FnMut(&CVec) -> CVec,
    max_steps: usize,
    rel_tol: f64,
) -> LanczosEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2c_2052);
    let mut q: CVec = DVector::from_fn(n, |_, _| {
        let x: f64 = StandardNormal.sample(&mut rng);
        C64::new(x, 0.0)
    });
    q.unscale_mut(q.norm());

    let max_steps = max_steps.min(n).max(1);
    let mut basis: Vec<CVec> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut estimate = LanczosEstimate {
        value: 0.0,
        steps: 0,
        converged: false,
    };

    for k in 0..max_steps {
        let mut w = apply(&basis[k]);
        let a = basis[k].dotc(&w).re;
        alpha.push(a);
        for _ in 0..2 {
            for qj in &basis {
                let c = qj.dotc(&w);
                w.axpy(-c, qj, C64::new(1.0, 0.0));
            }
        }
        let b = w.norm();

        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (imax, theta) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        let resid = b * eig.eigenvectors[(m - 1, imax)].abs();
        estimate = LanczosEstimate {
            value: theta,
            steps: m,
            converged: resid <= rel_tol * theta.abs() || b <= f64::EPSILON * theta.abs(),
        };
        if estimate.converged || k + 1 == max_steps {
            break;
        }
        beta.push(b);
        w.unscale_mut(b);
        basis.push(w);
    }
    estimate
}

const SMALLEST_REL_TOL: f64 = 1e-12;
const LARGEST_REL_TOL: f64 = 1e-8;
const LANCZOS_MAX_STEPS: usize = 400;

/// `σ_min(A)` from an LU factorization of `A`, as `1/√λ_max((AᴴA)⁻¹)`.
pub fn smallest_singular_value(fact: &Factorization) -> LanczosEstimate {
    let n = fact.dim();
    let mut est = lanczos_largest(
        n,
        |x| {
            let mut y = x.clone();
            fact.solve_in_place(y.as_mut_slice(), Op::Adjoint);
            fact.solve_in_place(y.as_mut_slice(), Op::Plain);
            y
        },
        LANCZOS_MAX_STEPS,
        SMALLEST_REL_TOL,
    );
    est.value = 1.0 / est.value.sqrt();
    est
}

/// `σ_max(A)` as `√λ_max(AᴴA)` from products with `A` and `Aᴴ`.
pub fn largest_singular_value(
    n: usize,
    apply: impl Fn(&CVec) -> CVec,
    apply_adjoint: impl Fn(&CVec) -> CVec,
) -> LanczosEstimate {
    let mut est = lanczos_largest(n, |x| apply_adjoint(&apply(x)), LANCZOS_MAX_STEPS, LARGEST_REL_TOL);
    est.value = est.value.max(0.0).sqrt();
    est
}
