//! Sweeps, effectivity summaries, timing comparisons and report files.
//!
//! CSV files carry a header row with a fixed column order. JSON summaries
//! carry a `schema_version` field.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Instant;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{evaluate_point, online_estimates, ErrorCertificate, EstimatorKind, EstimatorState};
use crate::greedy::{greedy_build, GreedyConfig, GreedyOutcome, GreedyReport};
use crate::linalg::{CMat, C64};
use crate::rom::ReducedModel;
use crate::system::{AffineSystem, ParameterGrid, ParameterPoint, Provenance};

pub const SCHEMA_VERSION: u32 = 1;

const SWEEP_MAGIC: &str = "# rbcert-sweep";

/// One `(point, port)` row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: usize,
    pub mu: ParameterPoint,
    pub port: usize,
    /// `‖x̂(μ)‖`; NaN where the reduced matrix was singular.
    pub state_norm: f64,
    /// `y = C x̂` for the requested output functionals.
    pub outputs: Vec<C64>,
    pub estimate: Option<f64>,
    pub true_error: Option<f64>,
    pub effectivity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub ports: usize,
    pub outputs: usize,
    pub extra_params: usize,
    /// Point-major, port-minor; `points × ports` rows.
    pub rows: Vec<SweepRow>,
    /// Points whose reduced matrix could not be factorized.
    pub singular: Vec<usize>,
    pub offline_seconds: f64,
    pub online_seconds: f64,
}

impl SweepResult {
    pub fn points(&self) -> usize {
        self.rows.len().checked_div(self.ports).unwrap_or(0)
    }

    pub fn grid(&self) -> Result<ParameterGrid> {
        let pts: Vec<ParameterPoint> = self.rows.iter().step_by(self.ports.max(1)).map(|r| r.mu.clone()).collect();
        ParameterGrid::new(pts, Provenance::Generated)
    }

    /// Certificates for the rows that carry an estimate.
    pub fn certificates(&self) -> Vec<ErrorCertificate> {
        self.rows
            .iter()
            .filter_map(|r| {
                let c = ErrorCertificate::new(r.mu.clone(), r.port, r.estimate?);
                Some(match r.true_error {
                    Some(t) => c.with_true_error(t),
                    None => c,
                })
            })
            .collect()
    }

    pub fn max_true_error(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.true_error).reduce(f64::max)
    }

    pub fn max_estimate(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.estimate).reduce(f64::max)
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["point".to_string(), "frequency".into()];
        h.extend((1..=self.extra_params).map(|k| format!("d{k}")));
        h.extend(["port", "state_norm", "estimate", "true_error", "effectivity"].map(String::from));
        for k in 0..self.outputs {
            h.push(format!("y{k}_re"));
            h.push(format!("y{k}_im"));
        }
        h
    }

    /// CSV with a leading `# rbcert-sweep` comment line holding the timings.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(
            file,
            "{SWEEP_MAGIC} v{SCHEMA_VERSION} ports={} outputs={} offline_seconds={} online_seconds={}",
            self.ports, self.outputs, self.offline_seconds, self.online_seconds
        )
        .map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(self.header())?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for r in &self.rows {
            let mut rec = vec![r.point.to_string(), r.mu.frequency.to_string()];
            rec.extend(r.mu.extra.iter().map(f64::to_string));
            rec.push(r.port.to_string());
            rec.push(r.state_norm.to_string());
            rec.push(opt(r.estimate));
            rec.push(opt(r.true_error));
            rec.push(opt(r.effectivity));
            for y in &r.outputs {
                rec.push(y.re.to_string());
                rec.push(y.im.to_string());
            }
            w.write_record(rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let bad = |m: String| Error::parse(path, m);
        let mut reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut first = String::new();
        reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
        let meta = first
            .trim()
            .strip_prefix(SWEEP_MAGIC)
            .ok_or_else(|| bad("missing sweep header line".into()))?;
        let field = |key: &str| -> Result<&str> {
            meta.split_whitespace()
                .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
                .ok_or_else(|| bad(format!("header lacks {key}")))
        };
        let num = |key: &str| -> Result<f64> { field(key)?.parse().map_err(|_| bad(format!("bad {key}"))) };
        let ports = num("ports")? as usize;
        let outputs = num("outputs")? as usize;
        let offline_seconds = num("offline_seconds")?;
        let online_seconds = num("online_seconds")?;

        let mut csv_reader = csv::Reader::from_reader(reader);
        let headers = csv_reader.headers()?.clone();
        let extra_params = headers.iter().filter(|h| h.starts_with('d') && h[1..].parse::<usize>().is_ok()).count();
        let mut rows = Vec::new();
        for (line, rec) in csv_reader.records().enumerate() {
            let rec = rec?;
            let at = |i: usize| rec.get(i).ok_or_else(|| bad(format!("row {}: too few columns", line + 1)));
            let f = |i: usize| -> Result<f64> { at(i)?.parse().map_err(|_| bad(format!("row {}: bad number", line + 1))) };
            let opt = |i: usize| -> Result<Option<f64>> {
                let s = at(i)?;
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad(format!("row {}: bad number", line + 1)))
                }
            };
            let point = at(0)?.parse().map_err(|_| bad(format!("row {}: bad point index", line + 1)))?;
            let extra = (0..extra_params).map(|k| f(2 + k)).collect::<Result<Vec<_>>>()?;
            let c = 2 + extra_params;
            let port = at(c)?.parse().map_err(|_| bad(format!("row {}: bad port", line + 1)))?;
            let outs = (0..outputs)
                .map(|k| Ok(C64::new(f(c + 5 + 2 * k)?, f(c + 6 + 2 * k)?)))
                .collect::<Result<Vec<_>>>()?;
            rows.push(SweepRow {
                point,
                mu: ParameterPoint::with_extra(f(1)?, extra),
                port,
                state_norm: f(c + 1)?,
                estimate: opt(c + 2)?,
                true_error: opt(c + 3)?,
                effectivity: opt(c + 4)?,
                outputs: outs,
            });
        }
        let mut singular: Vec<usize> = rows.iter().filter(|r| r.state_norm.is_nan()).map(|r| r.point).collect();
        singular.dedup();
        Ok(Self {
            ports,
            outputs,
            extra_params,
            rows,
            singular,
            offline_seconds,
            online_seconds,
        })
    }
}

fn check_outputs(rm: &ReducedModel, outputs: Option<&CMat>) -> Result<Option<CMat>> {
    match outputs {
        None => Ok(None),
        Some(c) if c.nrows() == 0 => Ok(None),
        Some(c) if c.ncols() != rm.n() => Err(Error::mismatch("output matrix columns", rm.n(), c.ncols())),
        Some(c) => Ok(Some(c * rm.basis().matrix())),
    }
}

struct PointOutcome {
    z: Option<CMat>,
    estimates: Option<Vec<f64>>,
    true_errors: Option<Vec<f64>>,
}

fn assemble_rows(
    grid: &ParameterGrid,
    ports: usize,
    cv: Option<&CMat>,
    outcomes: Vec<PointOutcome>,
) -> (Vec<SweepRow>, Vec<usize>) {
    let q = cv.map_or(0, |c| c.nrows());
    let mut rows = Vec::with_capacity(grid.len() * ports);
    let mut singular = Vec::new();
    for (i, (mu, o)) in grid.points().iter().zip(outcomes).enumerate() {
        if o.z.is_none() {
            singular.push(i);
        }
        let y = match (&o.z, cv) {
            (Some(z), Some(c)) => Some(c * z),
            _ => None,
        };
        for port in 0..ports {
            let estimate = o.estimates.as_ref().map(|e| e[port]);
            let true_error = o.true_errors.as_ref().map(|e| e[port]);
            let effectivity = match (estimate, true_error) {
                (Some(e), Some(t)) if t > 0.0 => Some(e / t),
                _ => None,
            };
            rows.push(SweepRow {
                point: i,
                mu: mu.clone(),
                port,
                state_norm: o.z.as_ref().map_or(f64::NAN, |z| z.column(port).norm()),
                outputs: match &y {
                    Some(y) => y.column(port).iter().copied().collect(),
                    None => vec![C64::new(f64::NAN, f64::NAN); q],
                },
                estimate,
                true_error,
                effectivity,
            });
        }
    }
    (rows, singular)
}

/// Online sweep: reduced solves, outputs `C x̂` and, for the proposed and
/// randomized kinds, estimates. Needs no full-order data.
pub fn sweep(
    rm: &ReducedModel,
    state: Option<&EstimatorState>,
    grid: &ParameterGrid,
    outputs: Option<&CMat>,
) -> Result<SweepResult> {
    let cv = check_outputs(rm, outputs)?;
    let started = Instant::now();
    let outcomes: Vec<PointOutcome> = grid
        .points()
        .par_iter()
        .map(|mu| match rm.solve_reduced(mu) {
            Ok(z) => {
                let estimates = match state {
                    Some(s) => online_estimates(s, mu, &z)?,
                    None => None,
                };
                Ok(PointOutcome {
                    z: Some(z),
                    estimates,
                    true_errors: None,
                })
            }
            Err(e) if e.is_singular() => {
                warn!("reduced matrix singular at {}", mu.label());
                Ok(PointOutcome {
                    z: None,
                    estimates: None,
                    true_errors: None,
                })
            }
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let online_seconds = started.elapsed().as_secs_f64();
    let (rows, singular) = assemble_rows(grid, rm.ports(), cv.as_ref(), outcomes);
    Ok(SweepResult {
        ports: rm.ports(),
        outputs: cv.map_or(0, |c| c.nrows()),
        extra_params: rm.domain().extra.len(),
        rows,
        singular,
        offline_seconds: 0.0,
        online_seconds,
    })
}

/// Sweep with full-order access: estimates of any kind and true errors.
pub fn validate(
    sys: &AffineSystem,
    rm: &ReducedModel,
    state: &EstimatorState,
    grid: &ParameterGrid,
    outputs: Option<&CMat>,
) -> Result<SweepResult> {
    let cv = check_outputs(rm, outputs)?;
    let started = Instant::now();
    let outcomes: Vec<PointOutcome> = grid
        .points()
        .par_iter()
        .map(|mu| {
            let x = sys.fom_solve(mu)?;
            match rm.rom_solve(mu) {
                Ok((z, x_hat)) => {
                    let estimates = match evaluate_point(sys, rm, state, mu, false) {
                        Ok(ev) => ev.estimates,
                        Err(e) if e.is_singular() => vec![f64::INFINITY; sys.ports()],
                        Err(e) => return Err(e),
                    };
                    let true_errors = (x - x_hat).column_iter().map(|c| c.norm()).collect();
                    Ok(PointOutcome {
                        z: Some(z),
                        estimates: Some(estimates),
                        true_errors: Some(true_errors),
                    })
                }
                Err(e) if e.is_singular() => Ok(PointOutcome {
                    z: None,
                    estimates: Some(vec![f64::INFINITY; sys.ports()]),
                    true_errors: Some(x.column_iter().map(|c| c.norm()).collect()),
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let online_seconds = started.elapsed().as_secs_f64();
    let (rows, singular) = assemble_rows(grid, rm.ports(), cv.as_ref(), outcomes);
    Ok(SweepResult {
        ports: rm.ports(),
        outputs: cv.map_or(0, |c| c.nrows()),
        extra_params: rm.domain().extra.len(),
        rows,
        singular,
        offline_seconds: 0.0,
        online_seconds,
    })
}

/// Full-order outputs `C x(μ)` (or the states when `outputs` is absent) for comparisons.
pub fn fom_outputs(sys: &AffineSystem, grid: &ParameterGrid, outputs: Option<&CMat>) -> Result<Vec<CMat>> {
    grid.points()
        .par_iter()
        .map(|mu| {
            let x = sys.fom_solve(mu)?;
            Ok(match outputs {
                Some(c) => c * x,
                None => x,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
    pub max: f64,
}

impl Quantiles {
    /// Nearest-rank quantiles of a nonempty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |p: f64| v[((p * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)];
        Some(Self {
            min: v[0],
            q10: at(0.1),
            median: at(0.5),
            q90: at(0.9),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectivitySummary {
    pub count: usize,
    /// Certificates with a `+∞` estimate, left out of every statistic.
    pub sentinels: usize,
    /// Certificates without a true error, left out of every statistic.
    pub missing_true_error: usize,
    pub max_estimate: Option<f64>,
    pub max_true_error: Option<f64>,
    /// `max estimate / max true error`.
    pub effectivity: Option<f64>,
    /// Distribution of per-certificate effectivities.
    pub quantiles: Option<Quantiles>,
}

pub fn effectivity_table(certs: &[ErrorCertificate]) -> EffectivitySummary {
    let sentinels = certs.iter().filter(|c| c.is_sentinel()).count();
    let usable: Vec<&ErrorCertificate> = certs.iter().filter(|c| !c.is_sentinel() && c.true_error.is_some()).collect();
    let max_estimate = usable.iter().map(|c| c.estimate).reduce(f64::max);
    let max_true_error = usable.iter().filter_map(|c| c.true_error).reduce(f64::max);
    let effectivity = match (max_estimate, max_true_error) {
        (Some(e), Some(t)) if t > 0.0 => Some(e / t),
        _ => None,
    };
    let per_point: Vec<f64> = usable.iter().filter_map(|c| c.effectivity).collect();
    EffectivitySummary {
        count: certs.len(),
        sentinels,
        missing_true_error: certs.iter().filter(|c| !c.is_sentinel() && c.true_error.is_none()).count(),
        max_estimate,
        max_true_error,
        effectivity,
        quantiles: Quantiles::of(&per_point),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub points: usize,
    pub fom_seconds: f64,
    pub offline_seconds: f64,
    pub online_seconds: f64,
    pub fom_per_point: f64,
    pub online_per_point: f64,
    /// `online_per_point / fom_per_point`.
    pub online_fraction: f64,
    /// `fom_seconds / (offline_seconds + online_seconds)`.
    pub speedup: f64,
}

/// Brute-force FOM sweep against offline plus online ROM time. Both sweeps
/// run point by point on the calling thread.
pub fn speedup_report(
    sys: &AffineSystem,
    rm: &ReducedModel,
    state: Option<&EstimatorState>,
    offline_seconds: f64,
    test_grid: &ParameterGrid,
    training_grid: Option<&ParameterGrid>,
) -> Result<SpeedupReport> {
    if let Some(t) = training_grid {
        if !test_grid.is_disjoint_from(t) {
            return Err(Error::InvalidSpec("test grid shares points with the training grid".into()));
        }
    }
    let t = Instant::now();
    for mu in test_grid.points() {
        std::hint::black_box(sys.fom_solve(mu)?);
    }
    let fom_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    for mu in test_grid.points() {
        let z = rm.solve_reduced(mu)?;
        if let Some(s) = state {
            std::hint::black_box(online_estimates(s, mu, &z)?);
        }
        std::hint::black_box(z);
    }
    let online_seconds = t.elapsed().as_secs_f64();
    let n = test_grid.len().max(1) as f64;
    Ok(SpeedupReport {
        points: test_grid.len(),
        fom_seconds,
        offline_seconds,
        online_seconds,
        fom_per_point: fom_seconds / n,
        online_per_point: online_seconds / n,
        online_fraction: (online_seconds / n) / (fom_seconds / n),
        speedup: fom_seconds / (offline_seconds + online_seconds),
    })
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    schema_version: u32,
    #[serde(flatten)]
    body: T,
}

/// Pretty JSON with a `schema_version` field next to the fields of `value`.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(
        file,
        &Versioned {
            schema_version: SCHEMA_VERSION,
            body: value,
        },
    )?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let v: Versioned<T> = serde_json::from_reader(BufReader::new(file))?;
    if v.schema_version != SCHEMA_VERSION {
        return Err(Error::parse(path, format!("unsupported schema_version {}", v.schema_version)));
    }
    Ok(v.body)
}

pub const GREEDY_COLUMNS: [&str; 9] = [
    "iteration",
    "r",
    "r_e",
    "eps_est",
    "eps_true",
    "effectivity",
    "mu_star",
    "mu_e_star",
    "seconds",
];

/// One row per iteration; parameter points are written as `f|d1|d2` labels.
pub fn write_greedy_csv(report: &GreedyReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    w.write_record(GREEDY_COLUMNS)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for it in &report.iterations {
        w.write_record([
            it.iteration.to_string(),
            it.r.to_string(),
            it.r_e.map_or(String::new(), |v| v.to_string()),
            it.eps_est.to_string(),
            opt(it.eps_true),
            opt(it.effectivity),
            it.mu_star.label(),
            it.mu_e_star.as_ref().map_or(String::new(), |m| m.label()),
            it.seconds.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads the iteration rows of [`write_greedy_csv`] back.
pub fn read_greedy_csv(path: &Path) -> Result<Vec<crate::greedy::IterationRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = || Error::parse(path, format!("row {}: malformed", line + 1));
        let get = |i: usize| rec.get(i).ok_or_else(bad);
        let opt_f = |i: usize| -> Result<Option<f64>> {
            let s = get(i)?;
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad())
            }
        };
        let mu_e = get(7)?;
        out.push(crate::greedy::IterationRecord {
            iteration: get(0)?.parse().map_err(|_| bad())?,
            r: get(1)?.parse().map_err(|_| bad())?,
            r_e: match get(2)? {
                "" => None,
                s => Some(s.parse().map_err(|_| bad())?),
            },
            eps_est: get(3)?.parse().map_err(|_| bad())?,
            eps_true: opt_f(4)?,
            effectivity: opt_f(5)?,
            mu_star: ParameterPoint::parse_label(get(6)?).ok_or_else(bad)?,
            mu_e_star: if mu_e.is_empty() {
                None
            } else {
                Some(ParameterPoint::parse_label(mu_e).ok_or_else(bad)?)
            },
            seconds: get(8)?.parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

/// One line of the estimator comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub estimator: EstimatorKind,
    pub termination: crate::greedy::Termination,
    pub iterations: usize,
    pub final_dim: usize,
    pub final_eps: Option<f64>,
    pub offline_seconds: f64,
    pub dual_seconds: f64,
    pub max_test_error: Option<f64>,
}

/// Whether the proposed estimator ended with a ROM no larger than the residual one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendCheck {
    pub proposed_dim: usize,
    pub residual_dim: usize,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub rows: Vec<CompareRow>,
    /// Estimators not run, with the reason.
    pub skipped: Vec<(EstimatorKind, String)>,
    pub trend: Option<TrendCheck>,
}

impl CompareSummary {
    pub fn row(&self, kind: EstimatorKind) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.estimator == kind)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
        w.write_record([
            "estimator",
            "termination",
            "iterations",
            "final_dim",
            "final_eps",
            "offline_seconds",
            "dual_seconds",
            "max_test_error",
        ])?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for r in &self.rows {
            w.write_record([
                r.estimator.to_string(),
                serde_json::to_value(r.termination)?.as_str().unwrap_or_default().to_string(),
                r.iterations.to_string(),
                r.final_dim.to_string(),
                opt(r.final_eps),
                r.offline_seconds.to_string(),
                r.dual_seconds.to_string(),
                opt(r.max_test_error),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Result of running one estimator in [`compare`].
pub struct CompareRun {
    pub outcome: GreedyOutcome,
    pub test: Option<SweepResult>,
}

/// Runs the greedy loop once per estimator kind on the same training grid.
/// The standard kind is skipped when `n` exceeds `base.svd_cap`.
pub fn compare(
    sys: &AffineSystem,
    training: &ParameterGrid,
    test: Option<&ParameterGrid>,
    base: &GreedyConfig,
    kinds: &[EstimatorKind],
) -> Result<(Vec<CompareRun>, CompareSummary)> {
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for &kind in kinds {
        if kind == EstimatorKind::Standard && sys.n() > base.svd_cap {
            let why = format!("n = {} exceeds the SVD cap {}", sys.n(), base.svd_cap);
            warn!("skipping standard estimator: {why}");
            skipped.push((kind, why));
            continue;
        }
        let cfg = GreedyConfig {
            estimator: kind,
            ..base.clone()
        };
        let outcome = greedy_build(sys, training, &cfg)?;
        let test_sweep = match test {
            Some(g) => Some(validate(sys, &outcome.rom, &crate::estimators::EstimatorState::Residual, g, None)?),
            None => None,
        };
        let rep = &outcome.report;
        rows.push(CompareRow {
            estimator: kind,
            termination: rep.termination,
            iterations: rep.iterations.len(),
            final_dim: rep.final_dim(),
            final_eps: rep.final_eps(),
            offline_seconds: rep.offline_seconds,
            dual_seconds: rep.dual_seconds,
            max_test_error: test_sweep.as_ref().and_then(|s| s.max_true_error()),
        });
        runs.push(CompareRun {
            outcome,
            test: test_sweep,
        });
    }
    let dim = |k: EstimatorKind| rows.iter().find(|r: &&CompareRow| r.estimator == k).map(|r| r.final_dim);
    let trend = match (dim(EstimatorKind::Proposed), dim(EstimatorKind::Residual)) {
        (Some(p), Some(r)) => {
            if p > r {
                warn!("trend violation: proposed final dimension {p} exceeds residual final dimension {r}");
            }
            Some(TrendCheck {
                proposed_dim: p,
                residual_dim: r,
                holds: p <= r,
            })
        }
        _ => None,
    };
    Ok((runs, CompareSummary { rows, skipped, trend }))
}
