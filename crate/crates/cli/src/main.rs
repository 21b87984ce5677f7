//! `rbcert`: generate benchmark systems, build certified ROMs, sweep and
//! validate them, and compare error estimators.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rbcert::benchmarks::{Family, Geometry, MassKind};
use rbcert::estimators::EstimatorKind;
use rbcert::greedy::InitialPolicy;

use config::{Command, CompareRun, GenerateRun, GreedyRun, RunConfig, SweepRun, ValidateRun};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] rbcert::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use rbcert::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Other(_) => 1,
            CliError::Core(e) => match e {
                E::NotConverged { .. } => 3,
                E::InvalidSpec(_) | E::DimensionTooLarge { .. } | E::DimensionMismatch { .. } | E::DegenerateGrid(_) => 4,
                E::Io { .. } | E::Parse { .. } | E::Json(_) | E::Csv(_) => 5,
                E::SingularMatrix { .. } | E::SingularReducedMatrix { .. } | E::EmptyBasis => 6,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rbcert", version, about = "Certified reduced-basis model order reduction")]
struct Cli {
    /// Directory for reports and resolved configs.
    #[arg(long, global = true, env = "RBCERT_REPORT_DIR")]
    report_dir: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Single-threaded execution with a fixed reduction order.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Write a synthetic benchmark system bundle.
    Generate(GenerateArgs),
    /// Build a ROM with the greedy algorithm.
    Greedy(GreedyArgs),
    /// Evaluate a saved ROM on a grid without full-order data.
    Sweep(SweepArgs),
    /// Compare a saved ROM against full-order solves.
    Validate(ValidateArgs),
    /// Run the greedy algorithm once per estimator on one system.
    Compare(CompareArgs),
    /// Replay a resolved config file.
    Run {
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Run config file (TOML or JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Benchmark spec file (TOML or JSON).
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    ports: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Frequency band in Hz as `LO,HI`.
    #[arg(long, value_delimiter = ',')]
    band: Option<Vec<f64>>,
    #[arg(long)]
    resonances: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_enum)]
    geometry: Option<GeometryArg>,
    #[arg(long, value_enum)]
    mass: Option<MassArg>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FamilyArg {
    ResonantCavity,
    DampedCavity,
    ThreeParamDielectric,
    RandomDense,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum GeometryArg {
    Line,
    Plane,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum MassArg {
    Lumped,
    Consistent,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum EstimatorArg {
    Standard,
    Residual,
    Randomized,
    Proposed,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(a: EstimatorArg) -> Self {
        match a {
            EstimatorArg::Standard => EstimatorKind::Standard,
            EstimatorArg::Residual => EstimatorKind::Residual,
            EstimatorArg::Randomized => EstimatorKind::Randomized,
            EstimatorArg::Proposed => EstimatorKind::Proposed,
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum InitialArg {
    Random,
    Endpoints,
}

/// Greedy settings shared by `greedy` and `compare`.
#[derive(Debug, Args)]
struct SettingsArgs {
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Number of random vectors for the randomized estimator.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    tol_rd: Option<f64>,
    #[arg(long)]
    realify: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    initial: Option<InitialArg>,
    #[arg(long)]
    track_true_error: bool,
    /// Largest n for which the standard estimator computes singular values.
    #[arg(long)]
    svd_cap: Option<usize>,
    /// Training grid CSV (`frequency,d1,...`).
    #[arg(long)]
    training: Option<PathBuf>,
    /// Uniform training grid with this many frequencies.
    #[arg(long, conflicts_with = "training")]
    training_points: Option<usize>,
}

#[derive(Debug, Args)]
struct GreedyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    system: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    #[command(flatten)]
    settings: SettingsArgs,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Grid CSV (`frequency,d1,...`).
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Midpoint grid with this many frequencies.
    #[arg(long, conflicts_with = "grid")]
    points: Option<usize>,
    /// Output functionals, one per row, as a dense Matrix Market file.
    #[arg(long)]
    outputs: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rom: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
    /// Skip error estimates.
    #[arg(long)]
    no_estimates: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    system: Option<PathBuf>,
    #[arg(long)]
    rom: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    system: Option<PathBuf>,
    /// Estimators to run, comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    estimators: Option<Vec<EstimatorArg>>,
    /// Held-out grid CSV for the max test error column.
    #[arg(long)]
    test: Option<PathBuf>,
    #[command(flatten)]
    settings: SettingsArgs,
}

fn load_base(path: &Option<PathBuf>, fallback: Command) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => {
            let cfg: RunConfig = config::read_file(p)?;
            if std::mem::discriminant(&cfg.command) != std::mem::discriminant(&fallback) {
                return Err(CliError::Usage(format!(
                    "{} holds a `{}` run, not `{}`",
                    p.display(),
                    cfg.command.name(),
                    fallback.name()
                )));
            }
            Ok(cfg)
        }
        None => Ok(RunConfig {
            report_dir: None,
            threads: None,
            deterministic: false,
            command: fallback,
        }),
    }
}

fn grid_file(path: &Path) -> rbcert::system::GridSpec {
    rbcert::system::GridSpec::File { path: path.to_path_buf() }
}

fn apply_settings(s: &mut rbcert::greedy::GreedyConfig, a: &SettingsArgs) {
    if let Some(v) = a.tol {
        s.tol = v;
    }
    if let Some(v) = a.max_iterations {
        s.max_iterations = v;
    }
    if let Some(v) = a.k {
        s.random_vectors = v;
    }
    if let Some(v) = a.tol_rd {
        s.tol_rd = v;
    }
    if a.realify {
        s.realify = true;
    }
    if let Some(v) = a.seed {
        s.seed = v;
    }
    if let Some(v) = a.initial {
        s.initial = match v {
            InitialArg::Random => InitialPolicy::Random,
            InitialArg::Endpoints => InitialPolicy::Endpoints,
        };
    }
    if a.track_true_error {
        s.track_true_error = true;
    }
    if let Some(v) = a.svd_cap {
        s.svd_cap = v;
    }
}

fn training_override(a: &SettingsArgs) -> Option<rbcert::system::GridSpec> {
    a.training.as_deref().map(grid_file).or(a.training_points.map(|count| rbcert::system::GridSpec::Uniform {
        count,
        extra: vec![],
    }))
}

fn eval_grid_override(a: &GridArgs) -> Option<rbcert::system::GridSpec> {
    a.grid.as_deref().map(grid_file).or(a.points.map(|count| rbcert::system::GridSpec::Midpoints {
        count,
        extra: vec![],
    }))
}

fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match cli.command {
        Sub::Run { config } => config::read_file(&config)?,
        Sub::Generate(a) => {
            let mut cfg = load_base(&a.config, Command::Generate(GenerateRun { out: None, spec: None }))?;
            let Command::Generate(run) = &mut cfg.command else { unreachable!() };
            if let Some(p) = &a.spec {
                run.spec = Some(config::read_file(p)?);
            }
            if a.out.is_some() {
                run.out = a.out;
            }
            let family = a.family.map(|f| match f {
                FamilyArg::ResonantCavity => Family::ResonantCavity,
                FamilyArg::DampedCavity => Family::DampedCavity,
                FamilyArg::ThreeParamDielectric => Family::ThreeParamDielectric,
                FamilyArg::RandomDense => Family::RandomDense,
            });
            let spec = match (run.spec.take(), family, a.n) {
                (Some(mut s), f, n) => {
                    if let Some(f) = f {
                        s.family = f;
                    }
                    if let Some(n) = n {
                        s.n = n;
                    }
                    s
                }
                (None, Some(f), Some(n)) => rbcert::benchmarks::BenchmarkSpec::new(f, n),
                (None, _, _) => return Err(CliError::Usage("generate needs --spec or both --family and --n".into())),
            };
            let mut spec = spec;
            if let Some(v) = a.ports {
                spec.ports = v;
            }
            if let Some(v) = a.seed {
                spec.seed = v;
            }
            if let Some(b) = a.band {
                let [lo, hi] = b[..] else {
                    return Err(CliError::Usage("--band takes exactly two values, LO,HI".into()));
                };
                spec.band = Some([lo, hi]);
            }
            if let Some(v) = a.resonances {
                spec.resonances = v;
            }
            if let Some(v) = a.eta {
                spec.eta = v;
            }
            if let Some(g) = a.geometry {
                spec.geometry = match g {
                    GeometryArg::Line => Geometry::Line,
                    GeometryArg::Plane => Geometry::Plane,
                };
            }
            if let Some(m) = a.mass {
                spec.mass = match m {
                    MassArg::Lumped => MassKind::Lumped,
                    MassArg::Consistent => MassKind::Consistent,
                };
            }
            run.spec = Some(spec);
            cfg
        }
        Sub::Greedy(a) => {
            let mut cfg = load_base(
                &a.config,
                Command::Greedy(GreedyRun {
                    system: None,
                    out: None,
                    training: None,
                    settings: Default::default(),
                }),
            )?;
            let Command::Greedy(run) = &mut cfg.command else { unreachable!() };
            if a.system.is_some() {
                run.system = a.system;
            }
            if a.out.is_some() {
                run.out = a.out;
            }
            if let Some(e) = a.estimator {
                run.settings.estimator = e.into();
            }
            apply_settings(&mut run.settings, &a.settings);
            if let Some(t) = training_override(&a.settings) {
                run.training = Some(t);
            }
            cfg
        }
        Sub::Sweep(a) => {
            let mut cfg = load_base(
                &a.config,
                Command::Sweep(SweepRun {
                    rom: None,
                    grid: None,
                    outputs: None,
                    estimates: true,
                }),
            )?;
            let Command::Sweep(run) = &mut cfg.command else { unreachable!() };
            if a.rom.is_some() {
                run.rom = a.rom;
            }
            if let Some(g) = eval_grid_override(&a.grid) {
                run.grid = Some(g);
            }
            if a.grid.outputs.is_some() {
                run.outputs = a.grid.outputs;
            }
            if a.no_estimates {
                run.estimates = false;
            }
            cfg
        }
        Sub::Validate(a) => {
            let mut cfg = load_base(
                &a.config,
                Command::Validate(ValidateRun {
                    system: None,
                    rom: None,
                    grid: None,
                    outputs: None,
                }),
            )?;
            let Command::Validate(run) = &mut cfg.command else { unreachable!() };
            if a.system.is_some() {
                run.system = a.system;
            }
            if a.rom.is_some() {
                run.rom = a.rom;
            }
            if let Some(g) = eval_grid_override(&a.grid) {
                run.grid = Some(g);
            }
            if a.grid.outputs.is_some() {
                run.outputs = a.grid.outputs;
            }
            cfg
        }
        Sub::Compare(a) => {
            let mut cfg = load_base(
                &a.config,
                Command::Compare(CompareRun {
                    system: None,
                    training: None,
                    test: None,
                    estimators: EstimatorKind::ALL.to_vec(),
                    settings: Default::default(),
                }),
            )?;
            let Command::Compare(run) = &mut cfg.command else { unreachable!() };
            if a.system.is_some() {
                run.system = a.system;
            }
            if let Some(list) = a.estimators {
                run.estimators = list.into_iter().map(Into::into).collect();
            }
            if let Some(t) = &a.test {
                run.test = Some(grid_file(t));
            }
            apply_settings(&mut run.settings, &a.settings);
            if let Some(t) = training_override(&a.settings) {
                run.training = Some(t);
            }
            cfg
        }
    };
    if cli.report_dir.is_some() {
        cfg.report_dir = cli.report_dir;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if cli.deterministic {
        cfg.deterministic = true;
    }
    Ok(cfg)
}

fn init_threads(cfg: &RunConfig) -> Result<(), CliError> {
    let threads = if cfg.deterministic { Some(1) } else { cfg.threads };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Other(format!("cannot configure thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = resolve(cli).and_then(|cfg| {
        init_threads(&cfg)?;
        commands::execute(&cfg)
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Core(rbcert::Error::DimensionTooLarge { n, cap }) = &e {
                eprintln!("hint: n = {n} exceeds the singular-value cap {cap}; raise --svd-cap or pick another --estimator");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
