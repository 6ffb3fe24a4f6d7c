//! Run configuration: one JSON file, flag overrides on top, and the
//! problem registry that configurations refer to by name.

use std::env;
use std::path::{Path, PathBuf};

use archbo_core::acquisition::AcquisitionSpec;
use archbo_core::evo::EvoConfig;
use archbo_core::surrogate::GpConfig;
use archbo_core::turbofan::{BenchConfig, TurbofanProblem};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable consulted when neither flag nor config file names
/// an output directory.
pub const OUT_DIR_ENV: &str = "ARCHBO_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Bo,
    Nsga2,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bo => "bo",
            Algorithm::Nsga2 => "nsga2",
        }
    }
}

/// Everything one `run` invocation needs. Every field has a default, so a
/// partial JSON file (or none at all) is a valid starting point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub problem: String,
    pub algorithm: Algorithm,
    pub budget: usize,
    /// Initial design size; `None` picks a third of the budget, capped at
    /// 20. Ignored by nsga2, which starts from its population instead.
    pub doe_size: Option<usize>,
    pub seed: u64,
    pub acquisition: AcquisitionSpec,
    /// `None` picks the per-variable grouped-anisotropy default for the
    /// problem's space.
    pub gp: Option<GpConfig>,
    pub evo: EvoConfig,
    pub bench: BenchConfig,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: "simple-turbofan".to_string(),
            algorithm: Algorithm::Bo,
            budget: 60,
            doe_size: None,
            seed: 0,
            acquisition: AcquisitionSpec::default(),
            gp: None,
            evo: EvoConfig::default(),
            bench: BenchConfig::default(),
            out_dir: None,
        }
    }
}

/// Flag-level overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct RunOverrides {
    pub problem: Option<String>,
    pub algorithm: Option<Algorithm>,
    pub budget: Option<usize>,
    pub doe_size: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn apply(&mut self, overrides: &RunOverrides) {
        if let Some(problem) = &overrides.problem {
            self.problem = problem.clone();
        }
        if let Some(algorithm) = overrides.algorithm {
            self.algorithm = algorithm;
        }
        if let Some(budget) = overrides.budget {
            self.budget = budget;
        }
        if let Some(doe_size) = overrides.doe_size {
            self.doe_size = Some(doe_size);
        }
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(out_dir) = &overrides.out_dir {
            self.out_dir = Some(out_dir.clone());
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("parse {}: {e}", path.display())))
}

pub fn resolve_out_dir(explicit: Option<PathBuf>) -> PathBuf {
    explicit
        .or_else(|| env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn build_problem(name: &str, bench: &BenchConfig) -> Result<TurbofanProblem, CliError> {
    match name {
        "simple-turbofan" => Ok(TurbofanProblem::new(bench.clone())),
        _ => Err(CliError::Config(format!(
            "unknown problem {name:?}; known problems: simple-turbofan"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use archbo_core::acquisition::Criterion;

    #[test]
    fn defaults_cover_the_standard_benchmark_run() {
        let config = RunConfig::default();
        assert_eq!(config.problem, "simple-turbofan");
        assert_eq!(config.algorithm, Algorithm::Bo);
        assert_eq!(config.budget, 60);
        assert_eq!(config.doe_size, None);
        assert!(config.bench.enable_hidden_constraint);
    }

    #[test]
    fn partial_json_fills_in_defaults() {
        let config: RunConfig = serde_json::from_str(
            r#"{"algorithm": "nsga2", "budget": 30, "acquisition": {"criterion": "ei"}}"#,
        )
        .unwrap();
        assert_eq!(config.algorithm, Algorithm::Nsga2);
        assert_eq!(config.budget, 30);
        assert_eq!(config.acquisition.criterion, Criterion::Ei);
        assert_eq!(config.acquisition.kappa, AcquisitionSpec::default().kappa);
        assert_eq!(config.evo, EvoConfig::default());
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut config = RunConfig::default();
        config.doe_size = Some(12);
        config.gp = Some(GpConfig::default());
        config.out_dir = Some(PathBuf::from("runs/a"));
        let json = serde_json::to_string_pretty(&config).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn overrides_win_over_the_file_values() {
        let mut config: RunConfig =
            serde_json::from_str(r#"{"budget": 100, "seed": 4, "out_dir": "from-file"}"#).unwrap();
        let overrides = RunOverrides {
            budget: Some(25),
            seed: Some(9),
            out_dir: Some(PathBuf::from("from-flag")),
            ..RunOverrides::default()
        };
        config.apply(&overrides);
        assert_eq!(config.budget, 25);
        assert_eq!(config.seed, 9);
        assert_eq!(config.out_dir.as_deref(), Some(Path::new("from-flag")));
        assert_eq!(config.problem, "simple-turbofan");
    }

    #[test]
    fn unknown_problem_is_a_config_error() {
        let err = build_problem("rocket", &BenchConfig::default()).unwrap_err();
        match err {
            CliError::Config(msg) => assert!(msg.contains("rocket"), "message was {msg}"),
            CliError::Io(_) => panic!("expected a config error"),
        }
    }

    #[test]
    fn explicit_out_dir_beats_the_environment() {
        assert_eq!(
            resolve_out_dir(Some(PathBuf::from("chosen"))),
            PathBuf::from("chosen")
        );
    }
}
