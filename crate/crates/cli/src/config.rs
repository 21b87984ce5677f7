//! Run configuration: one serializable record per invocation.
//!
//! Files are TOML unless the extension is `.json`; both map onto the same
//! [`RunConfig`]. Command-line flags are applied on top of a loaded file.

use std::path::{Path, PathBuf};

use rbcert::benchmarks::BenchmarkSpec;
use rbcert::estimators::EstimatorKind;
use rbcert::greedy::GreedyConfig;
use rbcert::system::GridSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub deterministic: bool,
    #[serde(flatten)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Generate(GenerateRun),
    Greedy(GreedyRun),
    Sweep(SweepRun),
    Validate(ValidateRun),
    Compare(CompareRun),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Greedy(_) => "greedy",
            Command::Sweep(_) => "sweep",
            Command::Validate(_) => "validate",
            Command::Compare(_) => "compare",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRun {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<BenchmarkSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedyRun {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Defaults to the system bundle's training grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<GridSpec>,
    #[serde(default)]
    pub settings: GreedyConfig,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRun {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rom: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Dense Matrix Market file with one output functional per row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub estimates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateRun {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rom: Option<PathBuf>,
    /// Defaults to the system bundle's test grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<PathBuf>,
}

fn all_estimators() -> Vec<EstimatorKind> {
    EstimatorKind::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareRun {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<GridSpec>,
    #[serde(default = "all_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub settings: GreedyConfig,
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Reads any serde type from a TOML or JSON file.
pub fn read_file<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| rbcert::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let parsed = if is_json(path) {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|message| {
        rbcert::Error::Parse {
            path: path.to_path_buf(),
            message,
        }
        .into()
    })
}

impl RunConfig {
    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self).map_err(|e| CliError::Other(format!("cannot serialize config: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = if is_json(path) {
            serde_json::to_string_pretty(self).map_err(rbcert::Error::from)?
        } else {
            self.to_toml()?
        };
        std::fs::write(path, text).map_err(|e| {
            rbcert::Error::Io {
                path: path.to_path_buf(),
                source: e,
            }
            .into()
        })
    }
}

/// A required path, or a usage error naming the flag.
pub fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf, CliError> {
    value
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("missing {flag} (flag or config file)")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rbcert::benchmarks::Family;

    fn sample() -> RunConfig {
        RunConfig {
            report_dir: Some("reports".into()),
            threads: Some(1),
            deterministic: true,
            command: Command::Greedy(GreedyRun {
                system: Some("sys".into()),
                out: Some("rom".into()),
                training: Some(GridSpec::Uniform { count: 11, extra: vec![] }),
                settings: GreedyConfig {
                    tol: 1e-7,
                    ..GreedyConfig::default()
                },
            }),
        }
    }

    #[test]
    fn toml_and_json_describe_the_same_run() {
        let cfg = sample();
        let toml_text = cfg.to_toml().unwrap();
        let json_text = serde_json::to_string(&cfg).unwrap();
        let a: RunConfig = toml::from_str(&toml_text).unwrap();
        let b: RunConfig = serde_json::from_str(&json_text).unwrap();
        assert_eq!(a, cfg);
        assert_eq!(b, cfg);
    }

    #[test]
    fn generate_config_round_trips() {
        let cfg = RunConfig {
            report_dir: None,
            threads: None,
            deterministic: false,
            command: Command::Generate(GenerateRun {
                out: Some("bundle".into()),
                spec: Some(BenchmarkSpec {
                    band: Some([0.5, 1.5]),
                    ..BenchmarkSpec::new(Family::ThreeParamDielectric, 300)
                }),
            }),
        };
        let text = cfg.to_toml().unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn hand_written_toml() {
        let text = r#"
            deterministic = true
            [compare]
            system = "sys"
            estimators = ["residual", "proposed"]
            [compare.settings]
            tol = 1e-5
            [compare.test]
            kind = "midpoints"
            count = 100
        "#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        let Command::Compare(c) = cfg.command else { panic!() };
        assert_eq!(c.estimators, [EstimatorKind::Residual, EstimatorKind::Proposed]);
        assert_eq!(c.settings.tol, 1e-5);
        assert_eq!(c.test, Some(GridSpec::Midpoints { count: 100, extra: vec![] }));
        assert!(toml::from_str::<RunConfig>("[greedy.settings]\ntolerance = 1").is_err());
    }
}
