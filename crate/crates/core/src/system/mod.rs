//! The affinely parametric full-order model `A(μ) X(μ) = B(μ)` with
//! `A(μ) = Σ θ_q(μ) A_q` and `B(μ) = (Σ θ_q(μ) Q_q) / scale`.

mod bundle;
mod coefficient;
mod grid;

pub use bundle::{load_system, read_manifest, save_system, SystemManifest, TermEntry, SYSTEM_FORMAT};
pub use coefficient::{Coefficient, ParamRatio};
pub use grid::{GridSet, GridSpec, ParameterDomain, ParameterGrid, ParameterPoint, Provenance};
pub(crate) use grid::point_key;

use crate::error::{Error, Result};
use crate::linalg::{factorize, CMat, ComplexMatrix, Factorization, Op, SparseMatrix, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixTerm {
    pub name: String,
    pub coefficient: Coefficient,
    pub matrix: ComplexMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhsTerm {
    pub name: String,
    pub coefficient: Coefficient,
    pub matrix: CMat,
}

impl MatrixTerm {
    pub fn new(name: impl Into<String>, coefficient: Coefficient, matrix: ComplexMatrix) -> Self {
        Self {
            name: name.into(),
            coefficient,
            matrix,
        }
    }
}

impl RhsTerm {
    pub fn new(name: impl Into<String>, coefficient: Coefficient, matrix: CMat) -> Self {
        Self {
            name: name.into(),
            coefficient,
            matrix,
        }
    }
}

/// Union sparsity pattern of all sparse matrix terms, with each term's
/// entries mapped to positions in it.
#[derive(Debug, Clone, PartialEq)]
struct UnionPattern {
    pattern: SparseMatrix,
    maps: Vec<Vec<usize>>,
}

impl UnionPattern {
    fn build(terms: &[MatrixTerm], n: usize) -> Option<Self> {
        let sparse: Vec<&SparseMatrix> = terms
            .iter()
            .map(|t| match &t.matrix {
                ComplexMatrix::Sparse(s) => Some(s),
                ComplexMatrix::Dense(_) => None,
            })
            .collect::<Option<_>>()?;
        let zero = C64::new(0.0, 0.0);
        let pattern = SparseMatrix::from_triplets(
            n,
            n,
            sparse.iter().flat_map(|s| s.triplets().map(move |(i, j, _)| (i, j, zero))),
        )
        .ok()?;
        let maps = sparse
            .iter()
            .map(|s| s.triplets().map(|(i, j, _)| pattern.position(i, j).unwrap()).collect())
            .collect();
        Some(Self { pattern, maps })
    }
}

/// An affinely parametric system. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSystem {
    n: usize,
    ports: usize,
    matrix_terms: Vec<MatrixTerm>,
    rhs_terms: Vec<RhsTerm>,
    domain: ParameterDomain,
    scale: f64,
    grids: GridSet,
    union: Option<UnionPattern>,
}

/// `10^max(0, round(log10(m)))` with `m` the largest `|Q_q|` entry times
/// `|θ_q|` at the upper corner of the domain; `1` for a zero right-hand side.
pub fn default_scale(rhs_terms: &[RhsTerm], domain: &ParameterDomain) -> f64 {
    let top = domain.upper();
    let m = rhs_terms
        .iter()
        .map(|t| t.matrix.iter().map(|v| v.norm()).fold(0.0, f64::max) * t.coefficient.eval(&top).norm())
        .fold(0.0, f64::max);
    if m > 0.0 && m.is_finite() {
        10f64.powi(m.log10().round().max(0.0) as i32)
    } else {
        1.0
    }
}

impl AffineSystem {
    /// Validates shapes and coefficients; `scale = None` applies [`default_scale`].
    pub fn new(
        matrix_terms: Vec<MatrixTerm>,
        rhs_terms: Vec<RhsTerm>,
        domain: ParameterDomain,
        scale: Option<f64>,
    ) -> Result<Self> {
        domain.validate()?;
        let first = matrix_terms
            .first()
            .ok_or_else(|| Error::InvalidSpec("a system needs at least one matrix term".into()))?;
        let n = first.matrix.nrows();
        for t in &matrix_terms {
            if t.matrix.shape() != (n, n) {
                return Err(Error::mismatch("matrix term", format!("{n}x{n}"), format!("{:?} for {}", t.matrix.shape(), t.name)));
            }
        }
        let ports = rhs_terms
            .first()
            .ok_or_else(|| Error::InvalidSpec("a system needs at least one right-hand-side term".into()))?
            .matrix
            .ncols();
        if ports == 0 {
            return Err(Error::InvalidSpec("right-hand side has no ports".into()));
        }
        for t in &rhs_terms {
            if t.matrix.shape() != (n, ports) {
                return Err(Error::mismatch("rhs term", format!("{n}x{ports}"), format!("{:?} for {}", t.matrix.shape(), t.name)));
            }
        }
        let extras = domain.extra.len();
        for (name, c) in matrix_terms
            .iter()
            .map(|t| (&t.name, t.coefficient))
            .chain(rhs_terms.iter().map(|t| (&t.name, t.coefficient)))
        {
            if let Some(r) = c.ratio {
                if r.param >= extras {
                    return Err(Error::InvalidSpec(format!(
                        "term {name} uses d{} but the domain declares {extras} extra parameter(s)",
                        r.param + 1
                    )));
                }
            }
        }
        let scale = scale.unwrap_or_else(|| default_scale(&rhs_terms, &domain));
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidSpec(format!("scale must be positive and finite, got {scale}")));
        }
        let union = UnionPattern::build(&matrix_terms, n);
        Ok(Self {
            n,
            ports,
            matrix_terms,
            rhs_terms,
            domain,
            scale,
            grids: GridSet::default(),
            union,
        })
    }

    pub fn with_grids(mut self, grids: GridSet) -> Self {
        self.grids = grids;
        self
    }

    /// Copy of the system with a different RHS scale.
    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidSpec(format!("scale must be positive and finite, got {scale}")));
        }
        let mut out = self.clone();
        out.scale = scale;
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ports(&self) -> usize {
        self.ports
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    pub fn grids(&self) -> &GridSet {
        &self.grids
    }

    pub fn matrix_terms(&self) -> &[MatrixTerm] {
        &self.matrix_terms
    }

    pub fn rhs_terms(&self) -> &[RhsTerm] {
        &self.rhs_terms
    }

    /// Errors unless `mu` has the right number of extra parameters and lies in the domain.
    pub fn check_point(&self, mu: &ParameterPoint) -> Result<()> {
        if self.domain.contains(mu) {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("parameter point {} is outside the domain", mu.label())))
        }
    }

    pub fn theta(&self, mu: &ParameterPoint) -> Vec<C64> {
        self.matrix_terms.iter().map(|t| t.coefficient.eval(mu)).collect()
    }

    pub fn rhs_theta(&self, mu: &ParameterPoint) -> Vec<C64> {
        self.rhs_terms.iter().map(|t| t.coefficient.eval(mu)).collect()
    }

    /// `A(μ) = Σ θ_q(μ) A_q`; sparse when every term is sparse.
    pub fn assemble(&self, mu: &ParameterPoint) -> ComplexMatrix {
        let theta = self.theta(mu);
        match &self.union {
            Some(u) => {
                let mut values = vec![C64::new(0.0, 0.0); u.pattern.nnz()];
                for ((t, map), &th) in self.matrix_terms.iter().zip(&u.maps).zip(&theta) {
                    let ComplexMatrix::Sparse(s) = &t.matrix else { unreachable!() };
                    for (&pos, &v) in map.iter().zip(s.values()) {
                        values[pos] += th * v;
                    }
                }
                ComplexMatrix::Sparse(u.pattern.with_values(values))
            }
            None => {
                let mut a = CMat::zeros(self.n, self.n);
                for (t, &th) in self.matrix_terms.iter().zip(&theta) {
                    match &t.matrix {
                        ComplexMatrix::Dense(m) => a.zip_apply(m, |acc, v| *acc += th * v),
                        ComplexMatrix::Sparse(s) => {
                            for (i, j, v) in s.triplets() {
                                a[(i, j)] += th * v;
                            }
                        }
                    }
                }
                ComplexMatrix::Dense(a)
            }
        }
    }

    /// `B(μ) = (Σ θ_q(μ) Q_q) / scale`.
    pub fn assemble_rhs(&self, mu: &ParameterPoint) -> CMat {
        let mut b = CMat::zeros(self.n, self.ports);
        for (t, th) in self.rhs_terms.iter().zip(self.rhs_theta(mu)) {
            b.zip_apply(&t.matrix, |acc, v| *acc += th * v);
        }
        b.unscale_mut(self.scale);
        b
    }

    /// `op(A(μ)) X`, evaluated term by term without forming `A(μ)`.
    pub fn apply_op(&self, mu: &ParameterPoint, x: &CMat, op: Op) -> CMat {
        let mut y = CMat::zeros(self.n, x.ncols());
        for (t, th) in self.matrix_terms.iter().zip(self.theta(mu)) {
            let th = if op == Op::Adjoint { th.conj() } else { th };
            t.matrix.mul_add_transposed(th, x, &mut y, op);
        }
        y
    }

    pub fn apply(&self, mu: &ParameterPoint, x: &CMat) -> CMat {
        self.apply_op(mu, x, Op::Plain)
    }

    pub fn factorize_at(&self, mu: &ParameterPoint) -> Result<Factorization> {
        factorize(&self.assemble(mu))
    }

    /// Direct solve for all ports with one factorization.
    pub fn fom_solve(&self, mu: &ParameterPoint) -> Result<CMat> {
        Ok(self.factorize_at(mu)?.solve(&self.assemble_rhs(mu)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rand_sparse(rng: &mut ChaCha8Rng, n: usize, density: f64) -> SparseMatrix {
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, C64::new(4.0 + rng.random::<f64>(), 0.0)));
            for j in 0..n {
                if i != j && rng.random::<f64>() < density {
                    trip.push((i, j, C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
                }
            }
        }
        SparseMatrix::from_triplets(n, n, trip).unwrap()
    }

    fn ones(n: usize, p: usize) -> CMat {
        CMat::from_element(n, p, C64::new(1.0, 0.0))
    }

    fn st_system(s: SparseMatrix, t: SparseMatrix, q: CMat, scale: f64) -> AffineSystem {
        AffineSystem::new(
            vec![
                MatrixTerm::new("S", Coefficient::ONE, ComplexMatrix::Sparse(s)),
                MatrixTerm::new("T", Coefficient::s_power(2), ComplexMatrix::Sparse(t)),
            ],
            vec![RhsTerm::new("Q", Coefficient::s_power(1), q)],
            ParameterDomain::band(0.1, 1.0),
            Some(scale),
        )
        .unwrap()
    }

    #[test]
    fn assemble_s_minus_omega_squared_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = rand_sparse(&mut rng, 12, 0.2);
        let t = rand_sparse(&mut rng, 12, 0.1);
        let sys = st_system(s.clone(), t.clone(), ones(12, 1), 1.0);
        let mu = ParameterPoint::new(0.3);
        let w2 = (2.0 * PI * 0.3f64).powi(2);
        let expect = s.to_dense() - t.to_dense() * C64::new(w2, 0.0);
        let got = sys.assemble(&mu);
        assert!(got.is_sparse());
        assert!((got.to_dense() - expect).norm() < 1e-12);
    }

    #[test]
    fn single_term_assembles_to_itself() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = rand_sparse(&mut rng, 6, 0.3);
        let sys = AffineSystem::new(
            vec![MatrixTerm::new("S", Coefficient::ONE, ComplexMatrix::Sparse(s.clone()))],
            vec![RhsTerm::new("Q", Coefficient::ONE, ones(6, 1))],
            ParameterDomain::band(1.0, 2.0),
            None,
        )
        .unwrap();
        assert_eq!(sys.assemble(&ParameterPoint::new(1.5)).to_dense(), s.to_dense());
    }

    #[test]
    fn rhs_scaling() {
        let q = CMat::from_fn(5, 2, |i, j| C64::new(i as f64 + 1.0, j as f64));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = rand_sparse(&mut rng, 5, 0.0);
        let mu = ParameterPoint::new(0.5);
        let one = st_system(s.clone(), s.clone(), q.clone(), 1.0);
        assert!((one.assemble_rhs(&mu) - &q * mu.s()).norm() < 1e-14);
        let big = one.with_scale(1e5).unwrap();
        assert!((big.assemble_rhs(&mu) * C64::new(1e5, 0.0) - one.assemble_rhs(&mu)).norm() < 1e-12);
        let half = one.with_scale(2.0).unwrap();
        assert_eq!(half.assemble_rhs(&mu) * C64::new(2.0, 0.0), one.assemble_rhs(&mu));
    }

    #[test]
    fn doubling_coefficients_doubles_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = rand_sparse(&mut rng, 10, 0.3);
        let t = rand_sparse(&mut rng, 10, 0.3);
        let sys = st_system(s.clone(), t.clone(), ones(10, 1), 1.0);
        let doubled = AffineSystem::new(
            sys.matrix_terms()
                .iter()
                .map(|m| MatrixTerm::new(m.name.clone(), m.coefficient.scaled(2.0), m.matrix.clone()))
                .collect(),
            sys.rhs_terms().to_vec(),
            sys.domain().clone(),
            Some(1.0),
        )
        .unwrap();
        let mu = ParameterPoint::new(0.7);
        let a = sys.assemble(&mu).to_dense();
        assert!((doubled.assemble(&mu).to_dense() - a * C64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn identity_and_diagonal_solves() {
        let n = 4;
        let id = AffineSystem::new(
            vec![MatrixTerm::new("I", Coefficient::ONE, ComplexMatrix::Sparse(SparseMatrix::identity(n)))],
            vec![RhsTerm::new("Q", Coefficient::s_power(1), ones(n, 2))],
            ParameterDomain::band(1.0, 2.0),
            Some(1.0),
        )
        .unwrap();
        let mu = ParameterPoint::new(1.2);
        assert_eq!(id.fom_solve(&mu).unwrap(), id.assemble_rhs(&mu));

        let d = SparseMatrix::from_triplets(n, n, (0..n).map(|i| (i, i, C64::new(i as f64 + 1.0, 0.0)))).unwrap();
        let diag = AffineSystem::new(
            vec![MatrixTerm::new("D", Coefficient::ONE, ComplexMatrix::Sparse(d))],
            vec![RhsTerm::new("Q", Coefficient::ONE, ones(n, 1))],
            ParameterDomain::band(1.0, 2.0),
            Some(1.0),
        )
        .unwrap();
        let x = diag.fom_solve(&mu).unwrap();
        for i in 0..n {
            assert!((x[i] - C64::new(1.0 / (i as f64 + 1.0), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn fom_solve_matches_dense_oracle_and_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 600;
        let s = rand_sparse(&mut rng, n, 2.0 / n as f64);
        let t = rand_sparse(&mut rng, n, 1.0 / n as f64);
        let q = CMat::from_fn(n, 2, |_, _| C64::new(rng.random_range(-1.0..1.0), 0.0));
        let sys = st_system(s, t, q, 1.0);
        let mu = ParameterPoint::new(0.05 + rng.random::<f64>() * 0.1);
        let x = sys.fom_solve(&mu).unwrap();
        let a = sys.assemble(&mu).to_dense();
        let b = sys.assemble_rhs(&mu);
        let oracle = a.clone().lu().solve(&b).unwrap();
        assert!((&x - &oracle).norm() <= 1e-9 * oracle.norm());
        for j in 0..2 {
            let r = sys.apply(&mu, &x.columns(j, 1).into_owned()) - b.columns(j, 1);
            assert!(r.norm() <= 1e-9 * b.column(j).norm());
        }
    }

    #[test]
    fn scale_covariance_is_exact_for_powers_of_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = rand_sparse(&mut rng, 30, 0.1);
        let sys = st_system(s.clone(), s, ones(30, 1), 1.0);
        let mu = ParameterPoint::new(0.2);
        let x1 = sys.fom_solve(&mu).unwrap();
        let x8 = sys.with_scale(8.0).unwrap().fom_solve(&mu).unwrap();
        assert_eq!(x8 * C64::new(8.0, 0.0), x1);
    }

    #[test]
    fn transposed_applications_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = rand_sparse(&mut rng, 9, 0.3);
        let t = rand_sparse(&mut rng, 9, 0.3);
        let sys = st_system(s, t, ones(9, 1), 1.0);
        let mu = ParameterPoint::new(0.4);
        let x = CMat::from_fn(9, 2, |_, _| C64::new(rng.random(), rng.random()));
        let a = sys.assemble(&mu).to_dense();
        assert!((sys.apply_op(&mu, &x, Op::Transpose) - a.transpose() * &x).norm() < 1e-12);
        assert!((sys.apply_op(&mu, &x, Op::Adjoint) - a.adjoint() * &x).norm() < 1e-12);
    }

    #[test]
    fn default_scale_rule() {
        let q = CMat::from_element(3, 1, C64::new(2.0, 0.0));
        let rhs = vec![RhsTerm::new("Q", Coefficient::s_power(1), q.clone())];
        let d = ParameterDomain::band(1.0, 1e4);
        // 2 * 2π·1e4 ≈ 1.26e5
        assert_eq!(default_scale(&rhs, &d), 1e5);
        let small = vec![RhsTerm::new("Q", Coefficient::ONE, q * C64::new(0.01, 0.0))];
        assert_eq!(default_scale(&small, &d), 1.0);
    }

    #[test]
    fn invalid_systems_are_rejected() {
        let d = ParameterDomain::band(1.0, 2.0);
        let a = ComplexMatrix::Sparse(SparseMatrix::identity(3));
        let bad_rhs = AffineSystem::new(
            vec![MatrixTerm::new("A", Coefficient::ONE, a.clone())],
            vec![RhsTerm::new("Q", Coefficient::ONE, ones(4, 1))],
            d.clone(),
            None,
        );
        assert!(matches!(bad_rhs, Err(Error::DimensionMismatch { .. })));
        let bad_ratio = AffineSystem::new(
            vec![MatrixTerm::new("A", Coefficient::ONE.with_ratio(0, 1.0), a.clone())],
            vec![RhsTerm::new("Q", Coefficient::ONE, ones(3, 1))],
            d.clone(),
            None,
        );
        assert!(matches!(bad_ratio, Err(Error::InvalidSpec(_))));
        let bad_scale = AffineSystem::new(
            vec![MatrixTerm::new("A", Coefficient::ONE, a)],
            vec![RhsTerm::new("Q", Coefficient::ONE, ones(3, 1))],
            d,
            Some(0.0),
        );
        assert!(matches!(bad_scale, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn singular_point_is_reported() {
        let n = 5;
        let sys = AffineSystem::new(
            vec![
                MatrixTerm::new("S", Coefficient::ONE, ComplexMatrix::Sparse(SparseMatrix::identity(n))),
                MatrixTerm::new("T", Coefficient::s_power(2), ComplexMatrix::Sparse(SparseMatrix::identity(n))),
            ],
            vec![RhsTerm::new("Q", Coefficient::ONE, ones(n, 1))],
            ParameterDomain::band(0.01, 1.0),
            Some(1.0),
        )
        .unwrap();
        // 1 - (2πf)^2 vanishes at f = 1/(2π)
        let err = sys.fom_solve(&ParameterPoint::new(1.0 / (2.0 * PI))).unwrap_err();
        assert!(err.is_singular());
    }
}
