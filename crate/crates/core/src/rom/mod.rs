//! Galerkin reduced-order models `Vᴴ A(μ) V z = Vᴴ B(μ)`.

mod bundle;

pub use bundle::{load_rom, save_rom, RomBundle, RomManifest, ROM_FORMAT};

use crate::error::{Error, Result};
use crate::linalg::{factorize_reduced, solve_reduced, BasisMatrix, CMat, DenseLu, Op};
use crate::system::{AffineSystem, Coefficient, ParameterDomain, ParameterPoint};

/// A dense reduced affine term.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTerm {
    pub name: String,
    pub coefficient: Coefficient,
    pub matrix: CMat,
}

pub(crate) fn combine(terms: &[ReducedTerm], mu: &ParameterPoint, rows: usize, cols: usize) -> CMat {
    let mut out = CMat::zeros(rows, cols);
    for t in terms {
        let th = t.coefficient.eval(mu);
        out.zip_apply(&t.matrix, |acc, v| *acc += th * v);
    }
    out
}

/// Reduced model on an orthonormal basis `V` (n×r), with every affine term
/// projected once.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    basis: BasisMatrix,
    terms: Vec<ReducedTerm>,
    rhs: Vec<ReducedTerm>,
    scale: f64,
    ports: usize,
    domain: ParameterDomain,
}

/// Projects every matrix term as `Wᴴ A_q V` and every rhs term as `Wᴴ Q_q`.
pub(crate) fn project_terms(sys: &AffineSystem, w: &CMat, v: &CMat) -> (Vec<ReducedTerm>, Vec<ReducedTerm>) {
    let terms = sys
        .matrix_terms()
        .iter()
        .map(|t| ReducedTerm {
            name: t.name.clone(),
            coefficient: t.coefficient,
            matrix: w.ad_mul(&t.matrix.mul(v)),
        })
        .collect();
    let rhs = sys
        .rhs_terms()
        .iter()
        .map(|t| ReducedTerm {
            name: t.name.clone(),
            coefficient: t.coefficient,
            matrix: w.ad_mul(&t.matrix),
        })
        .collect();
    (terms, rhs)
}

impl ReducedModel {
    /// Galerkin projection of `sys` onto `basis`.
    pub fn project(sys: &AffineSystem, basis: &BasisMatrix) -> Result<Self> {
        if basis.nrows() != sys.n() {
            return Err(Error::mismatch("projection basis", format!("{} rows", sys.n()), format!("{} rows", basis.nrows())));
        }
        if basis.ncols() == 0 {
            return Err(Error::EmptyBasis);
        }
        if !basis.is_orthonormal() {
            return Err(Error::InvalidSpec("projection basis must be orthonormal".into()));
        }
        let v = basis.matrix();
        let (terms, rhs) = project_terms(sys, v, v);
        Ok(Self {
            basis: basis.clone(),
            terms,
            rhs,
            scale: sys.scale(),
            ports: sys.ports(),
            domain: sys.domain().clone(),
        })
    }

    /// Reassembles a model from stored parts, checking shapes.
    pub fn from_parts(
        basis: BasisMatrix,
        terms: Vec<ReducedTerm>,
        rhs: Vec<ReducedTerm>,
        scale: f64,
        domain: ParameterDomain,
    ) -> Result<Self> {
        let r = basis.ncols();
        if r == 0 {
            return Err(Error::EmptyBasis);
        }
        let ports = rhs.first().map(|t| t.matrix.ncols()).ok_or_else(|| Error::InvalidSpec("reduced model without rhs terms".into()))?;
        if terms.is_empty() {
            return Err(Error::InvalidSpec("reduced model without matrix terms".into()));
        }
        for t in &terms {
            if t.matrix.shape() != (r, r) {
                return Err(Error::mismatch("reduced matrix term", format!("{r}x{r}"), format!("{:?}", t.matrix.shape())));
            }
        }
        for t in &rhs {
            if t.matrix.shape() != (r, ports) {
                return Err(Error::mismatch("reduced rhs term", format!("{r}x{ports}"), format!("{:?}", t.matrix.shape())));
            }
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidSpec(format!("scale must be positive and finite, got {scale}")));
        }
        Ok(Self {
            basis,
            terms,
            rhs,
            scale,
            ports,
            domain,
        })
    }

    pub fn basis(&self) -> &BasisMatrix {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    pub fn r(&self) -> usize {
        self.basis.ncols()
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

    pub fn terms(&self) -> &[ReducedTerm] {
        &self.terms
    }

    pub fn rhs_terms(&self) -> &[ReducedTerm] {
        &self.rhs
    }

    /// `Â(μ) = Σ θ_q(μ) Â_q`.
    pub fn assemble_reduced(&self, mu: &ParameterPoint) -> CMat {
        combine(&self.terms, mu, self.r(), self.r())
    }

    /// `b̂(μ) = Σ θ_q(μ) Vᴴ Q_q / scale`.
    pub fn assemble_reduced_rhs(&self, mu: &ParameterPoint) -> CMat {
        let mut b = combine(&self.rhs, mu, self.r(), self.ports);
        b.unscale_mut(self.scale);
        b
    }

    pub fn factorize_reduced(&self, mu: &ParameterPoint) -> Result<DenseLu> {
        factorize_reduced(&self.assemble_reduced(mu))
    }

    /// Reduced coordinates `z(μ)` for all ports (the online solve).
    pub fn solve_reduced(&self, mu: &ParameterPoint) -> Result<CMat> {
        let lu = self.factorize_reduced(mu)?;
        Ok(solve_reduced(&lu, &self.assemble_reduced_rhs(mu), Op::Plain))
    }

    pub fn reconstruct(&self, z: &CMat) -> CMat {
        self.basis.matrix() * z
    }

    /// `(z, x̂ = V z)`.
    pub fn rom_solve(&self, mu: &ParameterPoint) -> Result<(CMat, CMat)> {
        let z = self.solve_reduced(mu)?;
        let x = self.reconstruct(&z);
        Ok((z, x))
    }

    /// Largest relative deviation between stored reduced terms and a fresh
    /// projection of `sys`.
    pub fn consistency_defect(&self, sys: &AffineSystem) -> Result<f64> {
        let fresh = Self::project(sys, &self.basis)?;
        let rel = |a: &CMat, b: &CMat| (a - b).norm() / b.norm().max(f64::MIN_POSITIVE);
        if fresh.terms.len() != self.terms.len() || fresh.rhs.len() != self.rhs.len() {
            return Err(Error::mismatch("reduced model terms", fresh.terms.len(), self.terms.len()));
        }
        Ok(self
            .terms
            .iter()
            .zip(&fresh.terms)
            .chain(self.rhs.iter().zip(&fresh.rhs))
            .map(|(a, b)| if b.matrix.norm() == 0.0 { a.matrix.norm() } else { rel(&a.matrix, &b.matrix) })
            .fold(0.0, f64::max))
    }
}

/// `R(μ) = B(μ) − A(μ) X̂`, evaluated term by term.
pub fn residual(sys: &AffineSystem, mu: &ParameterPoint, x_hat: &CMat) -> CMat {
    let mut r = sys.assemble_rhs(mu);
    for (t, th) in sys.matrix_terms().iter().zip(sys.theta(mu)) {
        t.matrix.mul_add(-th, x_hat, &mut r);
    }
    r
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orth, ComplexMatrix, SparseMatrix, C64};
    use crate::system::{MatrixTerm, RhsTerm};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero() -> C64 {
        C64::new(0.0, 0.0)
    }

    fn rc(rng: &mut ChaCha8Rng) -> C64 {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    pub(crate) fn random_system(seed: u64, n: usize, p: usize) -> AffineSystem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dense = |shift: f64, rng: &mut ChaCha8Rng| {
            ComplexMatrix::Dense(CMat::from_fn(n, n, |i, j| rc(rng) * 0.3 + if i == j { C64::new(shift, 0.0) } else { zero() }))
        };
        let s = dense(3.0, &mut rng);
        let u = dense(0.0, &mut rng);
        let t = dense(1.0, &mut rng);
        let q = CMat::from_fn(n, p, |_, _| rc(&mut rng));
        AffineSystem::new(
            vec![
                MatrixTerm::new("S", Coefficient::ONE, s),
                MatrixTerm::new("U", Coefficient::s_power(1), u),
                MatrixTerm::new("T", Coefficient::s_power(2), t),
            ],
            vec![RhsTerm::new("Q", Coefficient::s_power(1), q)],
            ParameterDomain::band(0.01, 0.2),
            Some(1.0),
        )
        .unwrap()
    }

    fn random_basis(seed: u64, n: usize, r: usize) -> BasisMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        orth(&CMat::from_fn(n, r, |_, _| rc(&mut rng))).unwrap()
    }

    #[test]
    fn identity_basis_reproduces_full_terms_and_solution() {
        let sys = random_system(1, 8, 2);
        let rm = ReducedModel::project(&sys, &BasisMatrix::identity(8)).unwrap();
        for (a, b) in rm.terms().iter().zip(sys.matrix_terms()) {
            assert!((&a.matrix - b.matrix.to_dense()).norm() < 1e-14);
        }
        let mu = ParameterPoint::new(0.1);
        let (_, x) = rm.rom_solve(&mu).unwrap();
        let xf = sys.fom_solve(&mu).unwrap();
        assert!((x - &xf).norm() <= 1e-9 * xf.norm());
    }

    #[test]
    fn unit_vector_basis_picks_diagonal_entry() {
        let sys = random_system(2, 6, 1);
        let mut e = CMat::zeros(6, 1);
        e[3] = C64::new(1.0, 0.0);
        let rm = ReducedModel::project(&sys, &BasisMatrix::from_orthonormal(e)).unwrap();
        for (a, b) in rm.terms().iter().zip(sys.matrix_terms()) {
            assert_eq!(a.matrix[(0, 0)], b.matrix.to_dense()[(3, 3)]);
        }
    }

    #[test]
    fn scalar_reduced_system_is_a_division() {
        let sys = random_system(3, 6, 1);
        let rm = ReducedModel::project(&sys, &random_basis(4, 6, 1)).unwrap();
        let mu = ParameterPoint::new(0.05);
        let z = rm.solve_reduced(&mu).unwrap();
        let expect = rm.assemble_reduced_rhs(&mu)[0] / rm.assemble_reduced(&mu)[0];
        assert!((z[0] - expect).norm() <= 1e-15 * expect.norm());
    }

    #[test]
    fn projection_commutes_with_assembly() {
        let sys = random_system(5, 20, 1);
        let basis = random_basis(6, 20, 5);
        let rm = ReducedModel::project(&sys, &basis).unwrap();
        let v = basis.matrix();
        for f in [0.02, 0.11, 0.19] {
            let mu = ParameterPoint::new(f);
            let direct = v.adjoint() * sys.assemble(&mu).to_dense() * v;
            let red = rm.assemble_reduced(&mu);
            assert!((&red - &direct).norm() <= 1e-12 * direct.norm());
        }
        assert!(rm.consistency_defect(&sys).unwrap() < 1e-12);
    }

    #[test]
    fn snapshot_reproduction() {
        let sys = random_system(7, 30, 2);
        let mu = ParameterPoint::new(0.13);
        let x = sys.fom_solve(&mu).unwrap();
        let noise = random_basis(8, 30, 3).into_matrix();
        let basis = orth(&crate::linalg::hstack(&x, &noise)).unwrap();
        let rm = ReducedModel::project(&sys, &basis).unwrap();
        let (_, xh) = rm.rom_solve(&mu).unwrap();
        assert!((&xh - &x).norm() <= 1e-9 * x.norm());
    }

    #[test]
    fn residual_cases() {
        let sys = random_system(9, 12, 2);
        let mu = ParameterPoint::new(0.07);
        let b = sys.assemble_rhs(&mu);
        assert_eq!(residual(&sys, &mu, &CMat::zeros(12, 2)), b);
        let x = sys.fom_solve(&mu).unwrap();
        assert!(residual(&sys, &mu, &x).norm() <= 1e-9 * b.norm());
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let xr = CMat::from_fn(12, 2, |_, _| rc(&mut rng));
        let direct = &b - sys.assemble(&mu).to_dense() * &xr;
        assert!((residual(&sys, &mu, &xr) - direct).norm() <= 1e-13 * b.norm().max(1.0));
    }

    #[test]
    fn bad_bases_are_rejected() {
        let sys = random_system(11, 6, 1);
        assert!(matches!(ReducedModel::project(&sys, &BasisMatrix::identity(5)), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(ReducedModel::project(&sys, &BasisMatrix::empty(6)), Err(Error::EmptyBasis)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn galerkin_orthogonality_and_error_identity(seed in 0u64..10_000, r in 1usize..6, f in 0.01..0.2f64) {
            let n = 15;
            let sys = random_system(seed, n, 1);
            let basis = random_basis(seed + 1, n, r);
            let rm = ReducedModel::project(&sys, &basis).unwrap();
            let mu = ParameterPoint::new(f);
            let (z, xh) = rm.rom_solve(&mu).unwrap();
            let res = residual(&sys, &mu, &xh);
            let bh = rm.assemble_reduced_rhs(&mu);
            prop_assert!((basis.matrix().ad_mul(&res)).norm() <= 1e-9 * bh.norm());
            let red_res = rm.assemble_reduced(&mu) * &z - &bh;
            prop_assert!(red_res.norm() <= 1e-10 * bh.norm());
            let x = sys.fom_solve(&mu).unwrap();
            let lhs = (&x - &xh).norm();
            let rhs = sys.factorize_at(&mu).unwrap().solve(&res).norm();
            prop_assert!((lhs - rhs).abs() <= 1e-8 * lhs.max(rhs));
        }
    }

    #[test]
    fn sparse_terms_project_like_dense() {
        let n = 10;
        let s = SparseMatrix::from_triplets(n, n, (0..n).map(|i| (i, (i * 3) % n, C64::new(i as f64, 1.0)))).unwrap();
        let sys = AffineSystem::new(
            vec![MatrixTerm::new("S", Coefficient::ONE, ComplexMatrix::Sparse(s.clone()))],
            vec![RhsTerm::new("Q", Coefficient::ONE, CMat::from_element(n, 1, C64::new(1.0, 0.0)))],
            ParameterDomain::band(1.0, 2.0),
            None,
        )
        .unwrap();
        let basis = random_basis(12, n, 3);
        let rm = ReducedModel::project(&sys, &basis).unwrap();
        let direct = basis.matrix().adjoint() * s.to_dense() * basis.matrix();
        assert!((&rm.terms()[0].matrix - direct).norm() < 1e-12);
    }
}
