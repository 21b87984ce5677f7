use std::path::{Path, PathBuf};

use log::{info, warn};
use rbcert::benchmarks;
use rbcert::estimators::EstimatorState;
use rbcert::greedy::{ensure_converged, greedy_build};
use rbcert::linalg::{mtx, CMat};
use rbcert::report::{self, effectivity_table, write_json};
use rbcert::rom::{load_rom, save_rom, RomBundle};
use rbcert::system::{load_system, save_system, AffineSystem, GridSpec, ParameterDomain, ParameterGrid};
use serde::Serialize;

use crate::config::{required, Command, CompareRun, GenerateRun, GreedyRun, RunConfig, SweepRun, ValidateRun};
use crate::CliError;

const DEFAULT_REPORT_DIR: &str = "reports";

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    rbcert::Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
    .into()
}

/// Validates every input path, creates the report directory and records the
/// resolved config before any computation starts.
pub fn execute(cfg: &RunConfig) -> Result<(), CliError> {
    let report_dir = cfg.report_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_REPORT_DIR));
    check_inputs(&cfg.command)?;
    std::fs::create_dir_all(&report_dir).map_err(|e| io_err(&report_dir, e))?;
    let mut resolved = cfg.clone();
    resolved.report_dir = Some(report_dir.clone());
    resolved.write(&report_dir.join(format!("{}.config.toml", cfg.command.name())))?;
    match &cfg.command {
        Command::Generate(run) => generate(run, &report_dir),
        Command::Greedy(run) => greedy(run, &report_dir),
        Command::Sweep(run) => sweep(run, &report_dir),
        Command::Validate(run) => validate(run, &report_dir),
        Command::Compare(run) => compare(run, &report_dir),
    }
}

fn must_exist(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(io_err(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory")))
    }
}

fn check_grid(spec: &Option<GridSpec>) -> Result<(), CliError> {
    match spec {
        Some(GridSpec::File { path }) => must_exist(path),
        _ => Ok(()),
    }
}

fn check_inputs(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Generate(run) => {
            required(&run.out, "--out")?;
            run.spec
                .as_ref()
                .ok_or_else(|| CliError::Usage("generate needs a benchmark spec".into()))?
                .validate()?;
        }
        Command::Greedy(run) => {
            must_exist(required(&run.system, "--system")?)?;
            required(&run.out, "--out")?;
            check_grid(&run.training)?;
            run.settings.validate()?;
        }
        Command::Sweep(run) => {
            must_exist(required(&run.rom, "--rom")?)?;
            check_grid(&run.grid)?;
            if let Some(p) = &run.outputs {
                must_exist(p)?;
            }
        }
        Command::Validate(run) => {
            must_exist(required(&run.system, "--system")?)?;
            must_exist(required(&run.rom, "--rom")?)?;
            check_grid(&run.grid)?;
            if let Some(p) = &run.outputs {
                must_exist(p)?;
            }
        }
        Command::Compare(run) => {
            must_exist(required(&run.system, "--system")?)?;
            check_grid(&run.training)?;
            check_grid(&run.test)?;
            if run.estimators.is_empty() {
                return Err(CliError::Usage("compare needs at least one estimator".into()));
            }
            run.settings.validate()?;
        }
    }
    Ok(())
}

fn build_grid(spec: Option<&GridSpec>, fallback: GridSpec, domain: &ParameterDomain, base: &Path) -> Result<ParameterGrid, CliError> {
    Ok(spec.unwrap_or(&fallback).build(domain, Some(base))?)
}

fn training_grid(sys: &AffineSystem, spec: Option<&GridSpec>, base: &Path) -> Result<ParameterGrid, CliError> {
    let fallback = sys.grids().training.clone().unwrap_or(GridSpec::Uniform { count: 101, extra: vec![] });
    build_grid(spec, fallback, sys.domain(), base)
}

fn test_grid(sys: &AffineSystem, spec: Option<&GridSpec>, base: &Path) -> Result<ParameterGrid, CliError> {
    let fallback = sys.grids().test.clone().unwrap_or(GridSpec::Midpoints { count: 100, extra: vec![] });
    build_grid(spec, fallback, sys.domain(), base)
}

fn read_outputs(path: &Option<PathBuf>) -> Result<Option<CMat>, CliError> {
    Ok(match path {
        Some(p) => Some(mtx::read_dense(p)?),
        None => None,
    })
}

#[derive(Serialize)]
struct GenerateSummary<'a> {
    out: &'a Path,
    n: usize,
    ports: usize,
    band: [f64; 2],
    matrix_terms: Vec<&'a str>,
    resonances_hz: Vec<f64>,
}

fn generate(run: &GenerateRun, report_dir: &Path) -> Result<(), CliError> {
    let spec = run.spec.as_ref().expect("checked");
    let out = required(&run.out, "--out")?;
    let sys = benchmarks::generate(spec)?;
    save_system(out, &sys, Some(benchmarks::metadata(spec)?))?;
    let summary = GenerateSummary {
        out,
        n: sys.n(),
        ports: sys.ports(),
        band: sys.domain().band,
        matrix_terms: sys.matrix_terms().iter().map(|t| t.name.as_str()).collect(),
        resonances_hz: benchmarks::reference_resonances(spec)?,
    };
    write_json(&report_dir.join("generate.json"), &summary)?;
    println!("wrote {} (n = {}, {} matrix terms)", out.display(), sys.n(), summary.matrix_terms.len());
    Ok(())
}

fn greedy(run: &GreedyRun, report_dir: &Path) -> Result<(), CliError> {
    let system_dir = required(&run.system, "--system")?;
    let out = required(&run.out, "--out")?;
    let sys = load_system(system_dir)?;
    let grid = training_grid(&sys, run.training.as_ref(), system_dir)?;
    let outcome = greedy_build(&sys, &grid, &run.settings)?;
    let rep = &outcome.report;
    report::write_greedy_csv(rep, &report_dir.join("greedy.csv"))?;
    write_json(&report_dir.join("greedy.json"), rep)?;
    let metadata = serde_json::json!({
        "termination": rep.termination,
        "iterations": rep.iterations.len(),
        "final_eps": rep.final_eps(),
        "tol": rep.tol,
        "offline_seconds": rep.offline_seconds,
    });
    save_rom(
        out,
        &RomBundle {
            rom: outcome.rom.clone(),
            estimator: Some(outcome.state.clone()),
            metadata: Some(metadata),
        },
    )?;
    println!(
        "{}: r = {}, eps = {:.3e} after {} iterations ({:?})",
        rep.estimator,
        rep.final_dim(),
        rep.final_eps().unwrap_or(f64::NAN),
        rep.iterations.len(),
        rep.termination
    );
    ensure_converged(rep)?;
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary {
    points: usize,
    ports: usize,
    singular_points: usize,
    max_estimate: Option<f64>,
    online_seconds: f64,
}

fn sweep(run: &SweepRun, report_dir: &Path) -> Result<(), CliError> {
    let rom_dir = required(&run.rom, "--rom")?;
    let bundle = load_rom(rom_dir)?;
    let grid = build_grid(
        run.grid.as_ref(),
        GridSpec::Midpoints { count: 200, extra: vec![] },
        bundle.rom.domain(),
        rom_dir,
    )?;
    let outputs = read_outputs(&run.outputs)?;
    let state = if run.estimates { bundle.estimator.as_ref() } else { None };
    if run.estimates && !matches!(state, Some(EstimatorState::Proposed(_) | EstimatorState::Randomized(_))) {
        warn!("this ROM carries no online estimator data; sweeping without estimates");
    }
    let res = report::sweep(&bundle.rom, state, &grid, outputs.as_ref())?;
    res.write_csv(&report_dir.join("sweep.csv"))?;
    let summary = SweepSummary {
        points: res.points(),
        ports: res.ports,
        singular_points: res.singular.len(),
        max_estimate: res.max_estimate(),
        online_seconds: res.online_seconds,
    };
    write_json(&report_dir.join("sweep.json"), &summary)?;
    println!("swept {} points in {:.3} s", summary.points, summary.online_seconds);
    Ok(())
}

#[derive(Serialize)]
struct ValidateSummary {
    points: usize,
    ports: usize,
    max_true_error: Option<f64>,
    effectivity: report::EffectivitySummary,
}

fn validate(run: &ValidateRun, report_dir: &Path) -> Result<(), CliError> {
    let system_dir = required(&run.system, "--system")?;
    let sys = load_system(system_dir)?;
    let bundle = load_rom(required(&run.rom, "--rom")?)?;
    let grid = test_grid(&sys, run.grid.as_ref(), system_dir)?;
    let outputs = read_outputs(&run.outputs)?;
    let state = bundle.estimator.clone().unwrap_or(EstimatorState::Residual);
    let res = report::validate(&sys, &bundle.rom, &state, &grid, outputs.as_ref())?;
    res.write_csv(&report_dir.join("validate.csv"))?;
    let summary = ValidateSummary {
        points: res.points(),
        ports: res.ports,
        max_true_error: res.max_true_error(),
        effectivity: effectivity_table(&res.certificates()),
    };
    write_json(&report_dir.join("validate.json"), &summary)?;
    println!(
        "max true error {:.3e}, effectivity {}",
        summary.max_true_error.unwrap_or(f64::NAN),
        summary.effectivity.effectivity.map_or("n/a".to_string(), |e| format!("{e:.3}"))
    );
    Ok(())
}

fn compare(run: &CompareRun, report_dir: &Path) -> Result<(), CliError> {
    let system_dir = required(&run.system, "--system")?;
    let sys = load_system(system_dir)?;
    let training = training_grid(&sys, run.training.as_ref(), system_dir)?;
    let test = test_grid(&sys, run.test.as_ref(), system_dir)?;
    let (runs, summary) = report::compare(&sys, &training, Some(&test), &run.settings, &run.estimators)?;
    for r in &runs {
        let name = r.outcome.report.estimator.as_str();
        report::write_greedy_csv(&r.outcome.report, &report_dir.join(format!("compare_{name}.csv")))?;
        write_json(&report_dir.join(format!("compare_{name}.json")), &r.outcome.report)?;
    }
    summary.write_csv(&report_dir.join("compare.csv"))?;
    write_json(&report_dir.join("compare.json"), &summary)?;
    for row in &summary.rows {
        println!(
            "{:<10} r = {:>3}  iterations = {:>3}  max test error = {:.3e}  offline = {:.2} s",
            row.estimator.as_str(),
            row.final_dim,
            row.iterations,
            row.max_test_error.unwrap_or(f64::NAN),
            row.offline_seconds
        );
    }
    for (kind, why) in &summary.skipped {
        println!("{:<10} skipped: {why}", kind.as_str());
    }
    if let Some(t) = &summary.trend {
        if t.holds {
            info!("proposed dimension {} <= residual dimension {}", t.proposed_dim, t.residual_dim);
        } else {
            println!(
                "trend violation: proposed final dimension {} > residual final dimension {}",
                t.proposed_dim, t.residual_dim
            );
        }
    }
    Ok(())
}
