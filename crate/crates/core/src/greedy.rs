//! Greedy reduced-basis construction over a training grid `Ξ`.
//!
//! Every iteration adds the snapshots `A(μ*)⁻¹B(μ*)` to `V`. With the
//! proposed estimator a second stream `μ_e*` feeds the trajectory basis
//! `V_r`, and `V_e = orth([V_r, V])` carries the residual system. The
//! randomized estimator first builds its dual basis `V_rd` by a separate
//! greedy loop over the `K` dual systems `A(μ)ᵀ ξ_i = z_i`.

use std::time::Instant;

use log::{debug, info, warn};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    evaluate_point, random_vectors, ErrorSpace, EstimatorKind, EstimatorState, InfSupCache, PointEvaluation,
    RandomizedState,
};
use crate::linalg::{factorize_reduced, solve_reduced, BasisMatrix, CMat, Op, DEFAULT_SVD_CAP, C64};
use crate::rom::{combine, project_terms, ReducedModel};
use crate::system::{AffineSystem, ParameterGrid, ParameterPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPolicy {
    /// Two distinct points drawn by the seeded generator.
    Random,
    /// First and last grid points.
    Endpoints,
}

fn default_tol() -> f64 {
    1e-6
}
fn default_max_iterations() -> usize {
    50
}
fn default_estimator() -> EstimatorKind {
    EstimatorKind::Proposed
}
fn default_k() -> usize {
    5
}
fn default_tol_rd() -> f64 {
    0.5
}
fn default_max_dual_iterations() -> usize {
    30
}
fn default_initial() -> InitialPolicy {
    InitialPolicy::Random
}
fn default_svd_cap() -> usize {
    DEFAULT_SVD_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedyConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    /// Number of random vectors `K` (randomized estimator).
    #[serde(default = "default_k")]
    pub random_vectors: usize,
    /// Stopping tolerance of the `V_rd` loop on `max_i ‖z_i − A(μ)ᵀξ̃_i‖ / ‖z_i‖`.
    #[serde(default = "default_tol_rd")]
    pub tol_rd: f64,
    #[serde(default = "default_max_dual_iterations")]
    pub max_dual_iterations: usize,
    /// Replace `V` and `V_r` by `orth([Re V, Im V])` after every update.
    #[serde(default)]
    pub realify: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_initial")]
    pub initial: InitialPolicy,
    /// Record `ε_true` and the effectivity at every iteration (one FOM solve per grid point).
    #[serde(default)]
    pub track_true_error: bool,
    #[serde(default = "default_svd_cap")]
    pub svd_cap: usize,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iterations: default_max_iterations(),
            estimator: default_estimator(),
            random_vectors: default_k(),
            tol_rd: default_tol_rd(),
            max_dual_iterations: default_max_dual_iterations(),
            realify: false,
            seed: 0,
            initial: default_initial(),
            track_true_error: false,
            svd_cap: default_svd_cap(),
        }
    }
}

impl GreedyConfig {
    pub fn with_estimator(estimator: EstimatorKind, tol: f64) -> Self {
        Self {
            estimator,
            tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1".into());
        }
        if self.estimator == EstimatorKind::Randomized {
            if self.random_vectors == 0 {
                return bad("random_vectors must be >= 1".into());
            }
            if !(self.tol_rd > 0.0 && self.tol_rd.is_finite()) {
                return bad(format!("tol_rd must be positive, got {}", self.tol_rd));
            }
            if self.max_dual_iterations == 0 {
                return bad("max_dual_iterations must be >= 1".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    /// The selected snapshot added no new direction to `V`.
    Stagnated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `cols(V)` after this iteration's update.
    pub r: usize,
    /// `cols(V_e)` (proposed) or `cols(V_rd)` (randomized).
    pub r_e: Option<usize>,
    /// Maximum estimate over `Ξ` and ports.
    pub eps_est: f64,
    pub eps_true: Option<f64>,
    pub effectivity: Option<f64>,
    /// Point attaining `eps_est`, the next snapshot location.
    pub mu_star: ParameterPoint,
    pub mu_e_star: Option<ParameterPoint>,
    pub seconds: f64,
}

/// One step of the `V_rd` loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualRecord {
    pub iteration: usize,
    pub dim: usize,
    pub eps_rd: f64,
    pub mu: ParameterPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyReport {
    pub estimator: EstimatorKind,
    pub tol: f64,
    pub training_points: usize,
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
    /// Training points where `A(μ)` could not be factorized.
    pub skipped: Vec<ParameterPoint>,
    pub dual_iterations: Vec<DualRecord>,
    pub dual_seconds: f64,
    pub offline_seconds: f64,
}

impl GreedyReport {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn final_eps(&self) -> Option<f64> {
        self.iterations.last().map(|r| r.eps_est)
    }

    pub fn final_dim(&self) -> usize {
        self.iterations.last().map_or(0, |r| r.r)
    }
}

#[derive(Debug, Clone)]
pub struct GreedyOutcome {
    pub rom: ReducedModel,
    pub state: EstimatorState,
    pub report: GreedyReport,
}

/// `Err(NotConverged)` unless the run met its tolerance.
pub fn ensure_converged(report: &GreedyReport) -> Result<()> {
    if report.converged() {
        return Ok(());
    }
    Err(Error::NotConverged {
        iterations: report.iterations.len(),
        eps: report.final_eps().unwrap_or(f64::INFINITY),
        tol: report.tol,
    })
}

/// All port solutions at `mu` (n×p), scaled like [`AffineSystem::assemble_rhs`].
pub fn snapshot(sys: &AffineSystem, mu: &ParameterPoint) -> Result<CMat> {
    sys.fom_solve(mu)
}

fn rank_key(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Index of the largest entry, lowest index on ties; `NEG_INFINITY` marks
/// excluded points.
fn argmax(values: &[f64], exclude: Option<usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if Some(i) == exclude || rank_key(v) == f64::NEG_INFINITY {
            continue;
        }
        if best.is_none_or(|b| rank_key(v) > rank_key(values[b])) {
            best = Some(i);
        }
    }
    best
}

/// `μ* = argmax estimates` and, when `error_residuals` is given,
/// `μ_e* = argmax ‖r_e‖` with the runner-up taken if both coincide.
///
/// Ties go to the lowest index. Entries equal to `NEG_INFINITY` are excluded.
pub fn select_next_samples(estimates: &[f64], error_residuals: Option<&[f64]>) -> Result<(usize, Option<usize>)> {
    let star = argmax(estimates, None).ok_or_else(|| Error::DegenerateGrid("no admissible training point left".into()))?;
    let Some(re) = error_residuals else {
        return Ok((star, None));
    };
    if re.len() != estimates.len() {
        return Err(Error::mismatch("error residual list", estimates.len(), re.len()));
    }
    let e_star = argmax(re, Some(star)).ok_or_else(|| {
        Error::DegenerateGrid("two distinct training points are required for the error-trajectory samples".into())
    })?;
    Ok((star, Some(e_star)))
}

fn initial_samples(len: usize, cfg: &GreedyConfig) -> (usize, usize) {
    if len == 1 {
        return (0, 0);
    }
    match cfg.initial {
        InitialPolicy::Endpoints => (0, len - 1),
        InitialPolicy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let idx = sample(&mut rng, len, 2);
            (idx.index(0), idx.index(1))
        }
    }
}

fn grow(basis: &BasisMatrix, x: &CMat, realify: bool) -> Result<BasisMatrix> {
    if !realify {
        return basis.extend(x);
    }
    let mut split = CMat::zeros(x.nrows(), 2 * x.ncols());
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            split[(i, 2 * j)] = C64::new(x[(i, j)].re, 0.0);
            split[(i, 2 * j + 1)] = C64::new(x[(i, j)].im, 0.0);
        }
    }
    basis.extend(&split)
}

/// Training-set bookkeeping: admissible points and those skipped as singular.
struct Training<'a> {
    points: &'a [ParameterPoint],
    active: Vec<bool>,
    skipped: Vec<ParameterPoint>,
}

impl<'a> Training<'a> {
    fn new(grid: &'a ParameterGrid) -> Self {
        Self {
            points: grid.points(),
            active: vec![true; grid.len()],
            skipped: Vec::new(),
        }
    }

    fn skip(&mut self, i: usize, err: &Error) {
        if self.active[i] {
            warn!("skipping training point {} ({err})", self.points[i].label());
            self.active[i] = false;
            self.skipped.push(self.points[i].clone());
        }
    }

    /// Admissible replacement for a skipped sample: the best remaining point
    /// by `ranking`, or the lowest admissible index.
    fn replacement(&self, ranking: Option<&[f64]>, exclude: Option<usize>) -> Result<usize> {
        let masked: Vec<f64> = (0..self.points.len())
            .map(|i| match (self.active[i], ranking) {
                (false, _) => f64::NEG_INFINITY,
                (true, Some(r)) => rank_key(r[i]).max(f64::MIN),
                (true, None) => -(i as f64),
            })
            .collect();
        argmax(&masked, exclude).ok_or_else(|| Error::DegenerateGrid("every training point is singular".into()))
    }

    /// Snapshot at `*i`, moving `*i` to a replacement while `A(μ)` is singular.
    fn snapshot(&mut self, sys: &AffineSystem, i: &mut usize, ranking: Option<&[f64]>, exclude: Option<usize>) -> Result<CMat> {
        loop {
            match snapshot(sys, &self.points[*i]) {
                Ok(x) => return Ok(x),
                Err(e) if e.is_singular() => {
                    self.skip(*i, &e);
                    *i = self.replacement(ranking, exclude)?;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Greedy construction of `V_rd` from the dual snapshots `conj(A(μ)⁻ᵀ z_i)`.
fn build_dual_basis(
    sys: &AffineSystem,
    training: &mut Training,
    z: &CMat,
    cfg: &GreedyConfig,
    start: usize,
) -> Result<(BasisMatrix, Vec<DualRecord>)> {
    let z_norms: Vec<f64> = z.column_iter().map(|c| c.norm()).collect();
    let mut v_rd = BasisMatrix::empty(sys.n());
    let mut records = Vec::new();
    let mut i = start;
    let mut ranking: Option<Vec<f64>> = None;
    for iteration in 1..=cfg.max_dual_iterations {
        let fact = loop {
            match sys.factorize_at(&training.points[i]) {
                Ok(f) => break f,
                Err(e) if e.is_singular() => {
                    training.skip(i, &e);
                    i = training.replacement(ranking.as_deref(), None)?;
                }
                Err(e) => return Err(e),
            }
        };
        let duals = fact.solve_transpose(z).map(|v| v.conj());
        let grown = v_rd.extend(&duals)?;
        if grown.ncols() == v_rd.ncols() {
            break;
        }
        v_rd = grown;
        let m = v_rd.ncols();
        let (terms, _) = project_terms(sys, v_rd.matrix(), v_rd.matrix());
        let z_hat = v_rd.matrix().transpose() * z;
        let conj_v = v_rd.matrix().map(|v| v.conj());
        let values: Vec<f64> = (0..training.points.len())
            .into_par_iter()
            .map(|j| {
                if !training.active[j] {
                    return f64::NEG_INFINITY;
                }
                let mu = &training.points[j];
                let Ok(lu) = factorize_reduced(&combine(&terms, mu, m, m)) else {
                    return f64::INFINITY;
                };
                let xi = &conj_v * solve_reduced(&lu, &z_hat, Op::Transpose);
                let res = z - sys.apply_op(mu, &xi, Op::Transpose);
                res.column_iter().zip(&z_norms).map(|(c, nz)| c.norm() / nz).fold(0.0, f64::max)
            })
            .collect();
        let next = argmax(&values, None).ok_or_else(|| Error::DegenerateGrid("no admissible training point left".into()))?;
        let eps_rd = values[next];
        debug!("dual basis iteration {iteration}: dim {m}, eps_rd {eps_rd:.3e}");
        records.push(DualRecord {
            iteration,
            dim: m,
            eps_rd,
            mu: training.points[next].clone(),
        });
        if eps_rd <= cfg.tol_rd {
            break;
        }
        i = next;
        ranking = Some(values);
    }
    if records.last().is_none_or(|r| r.eps_rd > cfg.tol_rd) {
        warn!("dual basis stopped above tol_rd = {}", cfg.tol_rd);
    }
    Ok((v_rd, records))
}

fn evaluate_grid(
    sys: &AffineSystem,
    rom: &ReducedModel,
    state: &EstimatorState,
    training: &Training,
    with_error_residual: bool,
) -> Result<Vec<Option<PointEvaluation>>> {
    training
        .points
        .par_iter()
        .zip(training.active.par_iter())
        .map(|(mu, &active)| {
            if !active {
                return Ok(None);
            }
            match evaluate_point(sys, rom, state, mu, with_error_residual) {
                Ok(ev) => Ok(Some(ev)),
                Err(e) if e.is_singular() => Ok(Some(PointEvaluation {
                    estimates: vec![f64::INFINITY; sys.ports()],
                    error_residuals: with_error_residual.then(|| vec![f64::INFINITY; sys.ports()]),
                })),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Maximum true error over the admissible training points, caching FOM
/// solutions across iterations.
fn max_true_error(
    sys: &AffineSystem,
    rom: &ReducedModel,
    training: &mut Training,
    fom: &mut [Option<CMat>],
) -> Result<f64> {
    let missing: Vec<usize> = (0..fom.len()).filter(|&i| training.active[i] && fom[i].is_none()).collect();
    let solved: Vec<(usize, Result<CMat>)> = missing
        .into_par_iter()
        .map(|i| (i, sys.fom_solve(&training.points[i])))
        .collect();
    for (i, x) in solved {
        match x {
            Ok(x) => fom[i] = Some(x),
            Err(e) if e.is_singular() => training.skip(i, &e),
            Err(e) => return Err(e),
        }
    }
    let errors: Vec<f64> = (0..fom.len())
        .into_par_iter()
        .map(|i| match (&fom[i], training.active[i]) {
            (Some(x), true) => match rom.rom_solve(&training.points[i]) {
                Ok((_, x_hat)) => (x - x_hat).column_iter().map(|c| c.norm()).fold(0.0, f64::max),
                Err(_) => f64::INFINITY,
            },
            _ => 0.0,
        })
        .collect();
    Ok(errors.into_iter().fold(0.0, f64::max))
}

/// Runs the greedy loop on `grid` and returns the final ROM with its
/// estimator data. A run that stops above `tol` still returns `Ok`; use
/// [`ensure_converged`] to turn that into [`Error::NotConverged`].
pub fn greedy_build(sys: &AffineSystem, grid: &ParameterGrid, cfg: &GreedyConfig) -> Result<GreedyOutcome> {
    cfg.validate()?;
    if grid.is_empty() {
        return Err(Error::DegenerateGrid("empty training grid".into()));
    }
    for mu in grid.points() {
        sys.check_point(mu)?;
    }
    let kind = cfg.estimator;
    let proposed = kind == EstimatorKind::Proposed;
    if proposed && grid.len() < 2 {
        return Err(Error::DegenerateGrid(
            "the proposed estimator needs at least two training points".into(),
        ));
    }
    if kind == EstimatorKind::Standard && sys.n() > cfg.svd_cap {
        return Err(Error::DimensionTooLarge {
            n: sys.n(),
            cap: cfg.svd_cap,
        });
    }

    let started = Instant::now();
    let mut training = Training::new(grid);
    let (mut i_star, mut i_e) = initial_samples(grid.len(), cfg);

    let mut dual_records = Vec::new();
    let mut dual_seconds = 0.0;
    let mut dual = None;
    if kind == EstimatorKind::Randomized {
        let t = Instant::now();
        let z = random_vectors(sys.n(), cfg.random_vectors, cfg.seed);
        let (v_rd, records) = build_dual_basis(sys, &mut training, &z, cfg, i_star)?;
        info!("dual basis: dim {} after {} iterations", v_rd.ncols(), records.len());
        dual_records = records;
        dual_seconds = t.elapsed().as_secs_f64();
        dual = Some((v_rd, z));
    }

    let mut v = BasisMatrix::empty(sys.n());
    let mut v_r = BasisMatrix::empty(sys.n());
    let mut standard_state = EstimatorState::Standard(InfSupCache::new(cfg.svd_cap));
    let mut fom: Vec<Option<CMat>> = vec![None; grid.len()];
    let mut ranking: Option<Vec<f64>> = None;
    let mut result: Option<(ReducedModel, EstimatorState)> = None;
    let mut records = Vec::new();
    let mut termination = Termination::MaxIterations;

    for iteration in 1..=cfg.max_iterations {
        let t = Instant::now();
        let x = training.snapshot(sys, &mut i_star, ranking.as_deref(), proposed.then_some(i_e))?;
        let grown = grow(&v, &x, cfg.realify)?;
        if grown.ncols() == v.ncols() {
            info!("snapshot at {} adds no new direction", training.points[i_star].label());
            termination = Termination::Stagnated;
            break;
        }
        v = grown;
        let rom = ReducedModel::project(sys, &v)?;
        let state = match kind {
            EstimatorKind::Residual => EstimatorState::Residual,
            EstimatorKind::Standard => std::mem::replace(&mut standard_state, EstimatorState::Residual),
            EstimatorKind::Randomized => {
                let (v_rd, z) = dual.as_ref().unwrap();
                EstimatorState::Randomized(RandomizedState::new(sys, &v, v_rd, z.clone())?)
            }
            EstimatorKind::Proposed => {
                let xr = training.snapshot(sys, &mut i_e, ranking.as_deref(), Some(i_star))?;
                v_r = grow(&v_r, &xr, cfg.realify)?;
                EstimatorState::Proposed(ErrorSpace::build(sys, &v, &v_r)?)
            }
        };

        let evals = evaluate_grid(sys, &rom, &state, &training, proposed)?;
        let estimates: Vec<f64> = evals.iter().map(|e| e.as_ref().map_or(f64::NEG_INFINITY, |e| e.max_estimate())).collect();
        let error_residuals: Option<Vec<f64>> = proposed.then(|| {
            evals
                .iter()
                .map(|e| e.as_ref().and_then(|e| e.max_error_residual()).unwrap_or(f64::NEG_INFINITY))
                .collect()
        });
        let (next, next_e) = select_next_samples(&estimates, error_residuals.as_deref())?;
        let eps_est = estimates[next];

        let (eps_true, effectivity) = if cfg.track_true_error {
            let eps_true = max_true_error(sys, &rom, &mut training, &mut fom)?;
            (Some(eps_true), (eps_true > 0.0).then(|| eps_est / eps_true))
        } else {
            (None, None)
        };
        let r_e = match &state {
            EstimatorState::Proposed(s) => Some(s.v_e().ncols()),
            EstimatorState::Randomized(s) => Some(s.v_rd().ncols()),
            _ => None,
        };
        info!("iteration {iteration}: r = {}, eps_est = {eps_est:.3e}", v.ncols());
        records.push(IterationRecord {
            iteration,
            r: v.ncols(),
            r_e,
            eps_est,
            eps_true,
            effectivity,
            mu_star: training.points[next].clone(),
            mu_e_star: next_e.map(|i| training.points[i].clone()),
            seconds: t.elapsed().as_secs_f64(),
        });
        result = Some((rom, state));
        if eps_est <= cfg.tol {
            termination = Termination::Converged;
            break;
        }
        if let Some((_, s @ EstimatorState::Standard(_))) = result.as_mut() {
            standard_state = s.clone();
        }
        i_star = next;
        if let Some(e) = next_e {
            i_e = e;
        }
        ranking = Some(estimates);
    }

    let (rom, state) = result.ok_or(Error::EmptyBasis)?;
    let report = GreedyReport {
        estimator: kind,
        tol: cfg.tol,
        training_points: grid.len(),
        iterations: records,
        termination,
        skipped: training.skipped,
        dual_iterations: dual_records,
        dual_seconds,
        offline_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(GreedyOutcome { rom, state, report })
}
