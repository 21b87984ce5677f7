//! A posteriori estimators of the state error `‖x(μ) − x̂(μ)‖₂`.
//!
//! * standard: `‖r‖ / σ_min(A(μ))`
//! * residual: `‖r‖`
//! * randomized: `((1/K) Σ |ξ̃_iᵀ r|²)^{1/2}` with reduced dual solutions `ξ̃_i`
//! * proposed: `‖ẽ‖`, the Galerkin solution of the residual system `A e = r`
//!   on `V_e = orth([V_r, V])`
//!
//! The randomized and proposed estimators work entirely in reduced
//! coordinates: `Wᴴ r(μ)` is assembled from precomputed `Wᴴ Q_q` and
//! `Wᴴ A_q V`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::svd::{largest_singular_value, smallest_singular_value};
use crate::linalg::{
    extremal_singular_values, factorize_reduced, hstack, orth, solve_reduced, BasisMatrix, CMat, CVec, DenseLu, Op,
    DEFAULT_SVD_CAP, C64,
};
use crate::rom::{combine, project_terms, residual, ReducedModel, ReducedTerm};
use crate::system::{point_key, AffineSystem, ParameterPoint};

/// Below this order the inf-sup constant comes from a dense SVD; above it
/// from Lanczos iterations through a sparse factorization.
pub const DENSE_SVD_BELOW: usize = 200;

/// `σ_min < SINGULAR_RATIO · σ_max` makes the standard bound infinite.
pub const SINGULAR_RATIO: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Standard,
    Residual,
    Randomized,
    Proposed,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Standard,
        EstimatorKind::Residual,
        EstimatorKind::Randomized,
        EstimatorKind::Proposed,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Standard => "standard",
            EstimatorKind::Residual => "residual",
            EstimatorKind::Randomized => "randomized",
            EstimatorKind::Proposed => "proposed",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown estimator {s:?} (standard, residual, randomized, proposed)")))
    }
}

/// Estimated (and optionally true) error for one parameter point and port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCertificate {
    pub mu: ParameterPoint,
    pub port: usize,
    /// `+∞` when the estimator breaks down (standard estimator at a resonance).
    pub estimate: f64,
    pub true_error: Option<f64>,
    pub effectivity: Option<f64>,
}

impl ErrorCertificate {
    pub fn new(mu: ParameterPoint, port: usize, estimate: f64) -> Self {
        Self {
            mu,
            port,
            estimate,
            true_error: None,
            effectivity: None,
        }
    }

    pub fn with_true_error(mut self, true_error: f64) -> Self {
        self.true_error = Some(true_error);
        self.effectivity = (true_error > 0.0).then(|| self.estimate / true_error);
        self
    }

    pub fn is_sentinel(&self) -> bool {
        self.estimate.is_infinite()
    }
}

/// Reduced residual system on a basis `W`: `Wᴴ A_q W`, `Wᴴ A_q V`, `Wᴴ Q_q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSystem {
    basis: BasisMatrix,
    terms: Vec<ReducedTerm>,
    cross: Vec<ReducedTerm>,
    rhs: Vec<ReducedTerm>,
    scale: f64,
}

impl ResidualSystem {
    pub fn build(sys: &AffineSystem, w: &BasisMatrix, v: &BasisMatrix) -> Result<Self> {
        if w.nrows() != sys.n() || v.nrows() != sys.n() {
            return Err(Error::mismatch("residual system basis", sys.n(), w.nrows().max(v.nrows())));
        }
        if w.ncols() == 0 {
            return Err(Error::EmptyBasis);
        }
        let (terms, rhs) = project_terms(sys, w.matrix(), w.matrix());
        let cross = sys
            .matrix_terms()
            .iter()
            .map(|t| ReducedTerm {
                name: t.name.clone(),
                coefficient: t.coefficient,
                matrix: w.matrix().ad_mul(&t.matrix.mul(v.matrix())),
            })
            .collect();
        Ok(Self {
            basis: w.clone(),
            terms,
            cross,
            rhs,
            scale: sys.scale(),
        })
    }

    pub fn from_parts(
        basis: BasisMatrix,
        terms: Vec<ReducedTerm>,
        cross: Vec<ReducedTerm>,
        rhs: Vec<ReducedTerm>,
        scale: f64,
    ) -> Result<Self> {
        let m = basis.ncols();
        let ok = !terms.is_empty()
            && terms.len() == cross.len()
            && terms.iter().all(|t| t.matrix.shape() == (m, m))
            && cross.iter().all(|t| t.matrix.nrows() == m && t.matrix.ncols() == cross[0].matrix.ncols())
            && rhs.iter().all(|t| t.matrix.nrows() == m);
        if !ok {
            return Err(Error::mismatch("residual system terms", format!("{m} rows throughout"), "inconsistent shapes"));
        }
        Ok(Self {
            basis,
            terms,
            cross,
            rhs,
            scale,
        })
    }

    pub fn basis(&self) -> &BasisMatrix {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Number of ROM coordinates the cross terms expect.
    pub fn rom_dim(&self) -> usize {
        self.cross[0].matrix.ncols()
    }

    pub fn terms(&self) -> &[ReducedTerm] {
        &self.terms
    }

    pub fn cross_terms(&self) -> &[ReducedTerm] {
        &self.cross
    }

    pub fn rhs_terms(&self) -> &[ReducedTerm] {
        &self.rhs
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `Ã(μ) = Wᴴ A(μ) W`.
    pub fn assemble(&self, mu: &ParameterPoint) -> CMat {
        combine(&self.terms, mu, self.dim(), self.dim())
    }

    /// `Wᴴ r(μ) = Wᴴ B(μ) − Wᴴ A(μ) V z`.
    pub fn projected_residual(&self, mu: &ParameterPoint, z: &CMat) -> CMat {
        let ports = z.ncols();
        let mut out = combine(&self.rhs, mu, self.dim(), ports);
        out.unscale_mut(self.scale);
        let cross = combine(&self.cross, mu, self.dim(), self.rom_dim());
        out.gemm(C64::new(-1.0, 0.0), &cross, z, C64::new(1.0, 0.0));
        out
    }
}

/// Auxiliary data of the proposed estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSpace {
    /// Basis of sampled error-trajectory snapshots.
    pub v_r: BasisMatrix,
    pub residual: ResidualSystem,
}

impl ErrorSpace {
    /// `V_e = orth([V_r, V])` and the projected residual system on it.
    pub fn build(sys: &AffineSystem, v: &BasisMatrix, v_r: &BasisMatrix) -> Result<Self> {
        let v_e = build_error_subspace(v, v_r)?;
        Self::with_basis(sys, v, v_r.clone(), v_e)
    }

    /// Uses a caller-supplied `V_e` (which should contain `range(V)`).
    pub fn with_basis(sys: &AffineSystem, v: &BasisMatrix, v_r: BasisMatrix, v_e: BasisMatrix) -> Result<Self> {
        Ok(Self {
            v_r,
            residual: ResidualSystem::build(sys, &v_e, v)?,
        })
    }

    pub fn v_e(&self) -> &BasisMatrix {
        self.residual.basis()
    }
}

/// Auxiliary data of the randomized estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedState {
    /// Real Gaussian vectors `z_1 … z_K` as columns (n×K).
    pub z: CMat,
    /// `V_rdᵀ z` (m×K).
    pub z_hat: CMat,
    pub residual: ResidualSystem,
}

impl RandomizedState {
    pub fn new(sys: &AffineSystem, v: &BasisMatrix, v_rd: &BasisMatrix, z: CMat) -> Result<Self> {
        if z.nrows() != sys.n() || z.ncols() == 0 {
            return Err(Error::mismatch("random vectors", format!("{}xK with K >= 1", sys.n()), format!("{}x{}", z.nrows(), z.ncols())));
        }
        Ok(Self {
            z_hat: v_rd.matrix().transpose() * &z,
            z,
            residual: ResidualSystem::build(sys, v_rd, v)?,
        })
    }

    pub fn k(&self) -> usize {
        self.z.ncols()
    }

    pub fn v_rd(&self) -> &BasisMatrix {
        self.residual.basis()
    }

    /// Same `V_rd` and `z`, re-projected for a new ROM basis.
    pub fn rebuild(&self, sys: &AffineSystem, v: &BasisMatrix) -> Result<Self> {
        Self::new(sys, v, self.v_rd(), self.z.clone())
    }
}

/// `K` real standard-normal vectors of length `n` from a seeded generator.
pub fn random_vectors(n: usize, k: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CMat::from_fn(n, k, |_, _| C64::new(StandardNormal.sample(&mut rng), 0.0))
}

/// Memoized `(σ_min, σ_max)` of `A(μ)`, keyed by parameter point.
#[derive(Debug, Default)]
pub struct InfSupCache {
    cap: usize,
    values: Mutex<HashMap<Vec<u64>, (f64, f64)>>,
}

impl Clone for InfSupCache {
    fn clone(&self) -> Self {
        Self {
            cap: self.cap,
            values: Mutex::new(self.values.lock().unwrap().clone()),
        }
    }
}

impl PartialEq for InfSupCache {
    fn eq(&self, other: &Self) -> bool {
        self.cap == other.cap
    }
}

impl InfSupCache {
    pub fn new(cap: usize) -> Self {
        Self {
            cap,
            values: Mutex::new(HashMap::new()),
        }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn get(&self, sys: &AffineSystem, mu: &ParameterPoint) -> Result<(f64, f64)> {
        let key = point_key(mu);
        if let Some(&v) = self.values.lock().unwrap().get(&key) {
            return Ok(v);
        }
        let v = inf_sup(sys, mu, self.cap)?;
        self.values.lock().unwrap().insert(key, v);
        Ok(v)
    }
}

/// `(σ_min, σ_max)` of `A(μ)`; `σ_min = 0` when the factorization breaks down.
pub fn inf_sup(sys: &AffineSystem, mu: &ParameterPoint, cap: usize) -> Result<(f64, f64)> {
    let n = sys.n();
    if n > cap {
        return Err(Error::DimensionTooLarge { n, cap });
    }
    if n < DENSE_SVD_BELOW {
        return extremal_singular_values(&sys.assemble(mu), cap);
    }
    let apply = |x: &CVec| sys.apply_op(mu, &CMat::from_column_slice(n, 1, x.as_slice()), Op::Plain).column(0).into_owned();
    let apply_adj = |x: &CVec| sys.apply_op(mu, &CMat::from_column_slice(n, 1, x.as_slice()), Op::Adjoint).column(0).into_owned();
    let hi = largest_singular_value(n, apply, apply_adj).value;
    match sys.factorize_at(mu) {
        Ok(fact) => Ok((smallest_singular_value(&fact).value, hi)),
        Err(e) if e.is_singular() => Ok((0.0, hi)),
        Err(e) => Err(e),
    }
}

/// Estimator-specific data carried through a greedy run.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorState {
    Standard(InfSupCache),
    Residual,
    Randomized(RandomizedState),
    Proposed(ErrorSpace),
}

impl EstimatorState {
    pub fn kind(&self) -> EstimatorKind {
        match self {
            EstimatorState::Standard(_) => EstimatorKind::Standard,
            EstimatorState::Residual => EstimatorKind::Residual,
            EstimatorState::Randomized(_) => EstimatorKind::Randomized,
            EstimatorState::Proposed(_) => EstimatorKind::Proposed,
        }
    }

    pub fn standard() -> Self {
        EstimatorState::Standard(InfSupCache::new(DEFAULT_SVD_CAP))
    }

    /// The reduced residual system, for the kinds that have one.
    pub fn residual_system(&self) -> Option<&ResidualSystem> {
        match self {
            EstimatorState::Randomized(s) => Some(&s.residual),
            EstimatorState::Proposed(s) => Some(&s.residual),
            _ => None,
        }
    }
}

/// Per-port estimates at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEvaluation {
    pub estimates: Vec<f64>,
    /// `‖r_e‖` per port (proposed kind, when requested).
    pub error_residuals: Option<Vec<f64>>,
}

impl PointEvaluation {
    pub fn max_estimate(&self) -> f64 {
        self.estimates.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_error_residual(&self) -> Option<f64> {
        self.error_residuals.as_ref().map(|v| v.iter().copied().fold(0.0, f64::max))
    }
}

fn column_norms(m: &CMat) -> Vec<f64> {
    m.column_iter().map(|c| c.norm()).collect()
}

/// `z_e` solving `Ã(μ) z_e = V_eᴴ r(μ)` for every port.
fn error_coordinates(space: &ResidualSystem, mu: &ParameterPoint, z: &CMat) -> Result<CMat> {
    let lu = factorize_reduced(&space.assemble(mu))?;
    Ok(solve_reduced(&lu, &space.projected_residual(mu, z), Op::Plain))
}

/// `ξ̂_i` solving `Ã(μ)ᵀ ξ̂_i = V_rdᵀ z_i` (m×K).
fn dual_coordinates(lu: &DenseLu, state: &RandomizedState) -> CMat {
    solve_reduced(lu, &state.z_hat, Op::Transpose)
}

fn randomized_values(state: &RandomizedState, mu: &ParameterPoint, z: &CMat) -> Result<Vec<f64>> {
    let lu = factorize_reduced(&state.residual.assemble(mu))?;
    let xi = dual_coordinates(&lu, state);
    let wr = state.residual.projected_residual(mu, z);
    let t = xi.transpose() * wr;
    let k = state.k() as f64;
    Ok(t.column_iter().map(|c| (c.norm_squared() / k).sqrt()).collect())
}

/// Estimates for all ports at `mu`. Reduced singularities propagate as
/// errors; a singular full-order matrix makes the standard estimate `+∞`.
pub fn evaluate_point(
    sys: &AffineSystem,
    rm: &ReducedModel,
    state: &EstimatorState,
    mu: &ParameterPoint,
    with_error_residual: bool,
) -> Result<PointEvaluation> {
    let (z, x_hat) = rm.rom_solve(mu)?;
    match state {
        EstimatorState::Residual => Ok(PointEvaluation {
            estimates: column_norms(&residual(sys, mu, &x_hat)),
            error_residuals: None,
        }),
        EstimatorState::Standard(cache) => {
            let (lo, hi) = cache.get(sys, mu)?;
            let r = residual(sys, mu, &x_hat);
            let singular = !(lo >= SINGULAR_RATIO * hi) || lo == 0.0;
            Ok(PointEvaluation {
                estimates: column_norms(&r).into_iter().map(|v| if singular { f64::INFINITY } else { v / lo }).collect(),
                error_residuals: None,
            })
        }
        EstimatorState::Randomized(s) => Ok(PointEvaluation {
            estimates: randomized_values(s, mu, &z)?,
            error_residuals: None,
        }),
        EstimatorState::Proposed(space) => {
            let ze = error_coordinates(&space.residual, mu, &z)?;
            let estimates = column_norms(&ze);
            let error_residuals = if with_error_residual {
                let e_tilde = space.v_e().matrix() * &ze;
                let r = residual(sys, mu, &x_hat);
                Some(column_norms(&error_residual(sys, mu, &e_tilde, &r)))
            } else {
                None
            };
            Ok(PointEvaluation {
                estimates,
                error_residuals,
            })
        }
    }
}

/// Online-only estimates from reduced data (proposed and randomized kinds).
pub fn online_estimates(state: &EstimatorState, mu: &ParameterPoint, z: &CMat) -> Result<Option<Vec<f64>>> {
    match state {
        EstimatorState::Proposed(space) => Ok(Some(column_norms(&error_coordinates(&space.residual, mu, z)?))),
        EstimatorState::Randomized(s) => Ok(Some(randomized_values(s, mu, z)?)),
        _ => Ok(None),
    }
}

fn check_port(sys: &AffineSystem, port: usize) -> Result<()> {
    if port < sys.ports() {
        Ok(())
    } else {
        Err(Error::mismatch("port index", format!("< {}", sys.ports()), port))
    }
}

/// `δ(μ) = ‖r(μ)‖ / σ_min(A(μ))`; `+∞` at a resonance.
pub fn standard_estimate(sys: &AffineSystem, rm: &ReducedModel, mu: &ParameterPoint, port: usize, cap: usize) -> Result<ErrorCertificate> {
    check_port(sys, port)?;
    let state = EstimatorState::Standard(InfSupCache::new(cap));
    let eval = evaluate_point(sys, rm, &state, mu, false)?;
    Ok(ErrorCertificate::new(mu.clone(), port, eval.estimates[port]))
}

/// `‖r(μ)‖`.
pub fn residual_estimate(sys: &AffineSystem, rm: &ReducedModel, mu: &ParameterPoint, port: usize) -> Result<ErrorCertificate> {
    check_port(sys, port)?;
    let (_, x_hat) = rm.rom_solve(mu)?;
    let r = residual(sys, mu, &x_hat);
    Ok(ErrorCertificate::new(mu.clone(), port, r.column(port).norm()))
}

/// `V_e = orth([V_r, V])`.
pub fn build_error_subspace(v: &BasisMatrix, v_r: &BasisMatrix) -> Result<BasisMatrix> {
    if v.nrows() != v_r.nrows() {
        return Err(Error::mismatch("error subspace", format!("{} rows", v.nrows()), format!("{} rows", v_r.nrows())));
    }
    orth(&hstack(v_r.matrix(), v.matrix()))
}

/// `‖ẽ(μ)‖` and `ẽ(μ) = V_e z_e` for one port.
pub fn proposed_estimate(
    sys: &AffineSystem,
    rm: &ReducedModel,
    space: &ErrorSpace,
    mu: &ParameterPoint,
    port: usize,
) -> Result<(ErrorCertificate, CVec)> {
    check_port(sys, port)?;
    let z = rm.solve_reduced(mu)?;
    let ze = error_coordinates(&space.residual, mu, &z)?;
    let e_tilde: CVec = space.v_e().matrix() * ze.column(port);
    Ok((ErrorCertificate::new(mu.clone(), port, ze.column(port).norm()), e_tilde))
}

/// `r_e(μ) = r(μ) − A(μ) ẽ(μ)`.
pub fn error_residual(sys: &AffineSystem, mu: &ParameterPoint, e_tilde: &CMat, r: &CMat) -> CMat {
    let mut out = r.clone();
    for (t, th) in sys.matrix_terms().iter().zip(sys.theta(mu)) {
        t.matrix.mul_add(-th, e_tilde, &mut out);
    }
    out
}

/// `Δ̃(μ) = ((1/K) Σ_i |ξ̃_i(μ)ᵀ r(μ)|²)^{1/2}`.
pub fn randomized_estimate(
    sys: &AffineSystem,
    rm: &ReducedModel,
    state: &RandomizedState,
    mu: &ParameterPoint,
    port: usize,
) -> Result<ErrorCertificate> {
    check_port(sys, port)?;
    let z = rm.solve_reduced(mu)?;
    Ok(ErrorCertificate::new(mu.clone(), port, randomized_values(state, mu, &z)?[port]))
}

/// Reduced dual solutions `ξ̃_i(μ) = conj(V_rd) ξ̂_i(μ)` as columns (n×K).
pub fn dual_solutions(state: &RandomizedState, mu: &ParameterPoint) -> Result<CMat> {
    let lu = factorize_reduced(&state.residual.assemble(mu))?;
    Ok(state.v_rd().matrix().map(|v| v.conj()) * dual_coordinates(&lu, state))
}

/// `‖x(μ) − x̂(μ)‖` for one port via a full-order solve.
pub fn true_error(sys: &AffineSystem, rm: &ReducedModel, mu: &ParameterPoint, port: usize) -> Result<f64> {
    check_port(sys, port)?;
    Ok(true_errors(sys, rm, mu)?[port])
}

/// Per-port true errors.
pub fn true_errors(sys: &AffineSystem, rm: &ReducedModel, mu: &ParameterPoint) -> Result<Vec<f64>> {
    let x = sys.fom_solve(mu)?;
    let (_, x_hat) = rm.rom_solve(mu)?;
    Ok(column_norms(&(x - x_hat)))
}
