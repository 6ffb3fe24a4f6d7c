//! Read-only reports about a problem: combinatorial counts of its design
//! space and the sampled reference optimum.

use std::path::PathBuf;

use archbo_core::bo::Problem;
use archbo_core::design_space::DEFAULT_ENUMERATION_CAP;
use archbo_core::rng::substream;
use archbo_core::turbofan::{brute_force_optimum, BenchConfig};
use serde::{Deserialize, Serialize};

use crate::config::{build_problem, resolve_out_dir};
use crate::{output, points, CliError};

pub fn cmd_enumerate(problem_name: &str) -> Result<(), CliError> {
    let problem = build_problem(problem_name, &BenchConfig::default())?;
    let space = problem.space();
    let enumeration = space
        .enumerate_discrete(DEFAULT_ENUMERATION_CAP)
        .map_err(|e| CliError::Config(format!("enumeration failed: {e}")))?;
    let architectures = space
        .count_architectures(DEFAULT_ENUMERATION_CAP)
        .map_err(|e| CliError::Config(format!("enumeration failed: {e}")))?;
    let cartesian = u64::try_from(enumeration.cartesian)
        .map_err(|_| CliError::Config("discrete cartesian product exceeds u64".into()))?;
    let report = serde_json::json!({
        "cartesian": cartesian,
        "valid": enumeration.assignments.len(),
        "architectures": architectures,
        "relaxed_dim": space.encoded_dim(),
    });
    println!("{}", output::to_pretty_string(&report));
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OracleReport {
    pub problem: String,
    pub effort: usize,
    pub seed: u64,
    pub hidden_constraint: bool,
    pub objective: f64,
    pub point: serde_json::Map<String, serde_json::Value>,
}

pub fn cmd_oracle(
    problem_name: &str,
    effort: usize,
    seed: u64,
    hidden: bool,
    out_dir: Option<PathBuf>,
) -> Result<(), CliError> {
    if effort == 0 {
        return Err(CliError::Config("effort must be at least 1".into()));
    }
    let bench = BenchConfig { enable_hidden_constraint: hidden, ..BenchConfig::default() };
    let problem = build_problem(problem_name, &bench)?;
    let mut rng = substream(seed, "bench");
    let (point, objective) = brute_force_optimum(&bench, effort, &mut rng)
        .map_err(|e| CliError::Config(format!("oracle search failed: {e}")))?;
    let report = OracleReport {
        problem: problem_name.to_string(),
        effort,
        seed,
        hidden_constraint: hidden,
        objective,
        point: points::to_named(problem.space(), &point),
    };
    println!("{}", output::to_pretty_string(&report));
    let dir = resolve_out_dir(out_dir);
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Io(format!("create {}: {e}", dir.display())))?;
    output::write_json(&dir.join("oracle.json"), &report)
}
