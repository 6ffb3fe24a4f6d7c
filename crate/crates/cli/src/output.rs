//! Persisted run artifacts: history.json, convergence.csv, summary.json.
//!
//! Files are written atomically (temp then rename) so a crashed process
//! never leaves a half-written artifact behind, and all JSON goes through
//! one pretty-printer so repeated runs produce byte-identical output.

use std::fs;
use std::path::{Path, PathBuf};

use archbo_core::bo::{Evaluation, RunHistory};
use archbo_core::design_space::DesignSpace;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};

use crate::config::RunConfig;
use crate::points;
use crate::CliError;

/// Complete trace of one run, with points spelled out by variable name.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HistoryFile {
    pub config: RunConfig,
    pub seed: u64,
    pub records: Vec<HistoryRecord>,
    pub final_best: Option<FinalBest>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iteration: usize,
    pub point: Map<String, Json>,
    #[serde(flatten)]
    pub evaluation: Evaluation,
    pub best_so_far: Option<f64>,
    pub fit_time: f64,
    pub infill_time: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FinalBest {
    pub point: Map<String, Json>,
    pub objective: f64,
}

/// The scalar facts `compare` aggregates across runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub problem: String,
    pub algorithm: String,
    pub budget: usize,
    pub doe_size: usize,
    pub seed: u64,
    pub best_objective: Option<f64>,
    pub feasible: bool,
    pub n_fe: usize,
    pub n_failed: usize,
    /// Real elapsed seconds for the whole run, regardless of --timings.
    pub wall_time: f64,
}

pub fn history_file(space: &DesignSpace, config: &RunConfig, history: &RunHistory) -> HistoryFile {
    let records = history
        .records
        .iter()
        .map(|r| HistoryRecord {
            iteration: r.iteration,
            point: points::to_named(space, &r.point),
            evaluation: r.evaluation.clone(),
            best_so_far: r.best_so_far,
            fit_time: r.fit_time,
            infill_time: r.infill_time,
        })
        .collect();
    let final_best = history.final_best.as_ref().map(|(point, objective)| FinalBest {
        point: points::to_named(space, point),
        objective: *objective,
    });
    HistoryFile { config: config.clone(), seed: history.seed, records, final_best }
}

pub fn summary(config: &RunConfig, history: &RunHistory, wall_time: f64) -> Summary {
    Summary {
        problem: config.problem.clone(),
        algorithm: config.algorithm.name().to_string(),
        budget: config.budget,
        doe_size: history.config.doe_size,
        seed: history.seed,
        best_objective: history.final_best.as_ref().map(|(_, v)| *v),
        feasible: history.final_best.is_some(),
        n_fe: history.records.len(),
        n_failed: history.records.iter().filter(|r| !r.evaluation.outcome.is_ok()).count(),
        wall_time,
    }
}

/// One CSV row per evaluation: index, status, objective, feasibility and
/// the running best. Failed rows leave objective and best empty.
pub fn convergence_csv(history: &RunHistory) -> Result<Vec<u8>, CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["eval_index", "status", "objective", "feasible", "best_so_far"])
        .map_err(|e| CliError::Io(format!("render csv: {e}")))?;
    for record in &history.records {
        let outcome = &record.evaluation.outcome;
        let status = if outcome.is_ok() { "ok" } else { "failed" };
        let objective = outcome.objective().map(|v| v.to_string()).unwrap_or_default();
        let best = record.best_so_far.map(|v| v.to_string()).unwrap_or_default();
        writer
            .write_record([
                record.iteration.to_string(),
                status.to_string(),
                objective,
                outcome.is_feasible().to_string(),
                best,
            ])
            .map_err(|e| CliError::Io(format!("render csv: {e}")))?;
    }
    writer.into_inner().map_err(|e| CliError::Io(format!("render csv: {e}")))
}

pub fn to_pretty_string<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("artifact types serialize")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = to_pretty_string(value).into_bytes();
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp: PathBuf = path.to_path_buf();
    let mut name = path
        .file_name()
        .ok_or_else(|| CliError::Io(format!("{} has no file name", path.display())))?
        .to_os_string();
    name.push(".tmp");
    tmp.set_file_name(name);
    fs::write(&tmp, bytes).map_err(|e| CliError::Io(format!("write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| CliError::Io(format!("rename {} -> {}: {e}", tmp.display(), path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use archbo_core::bo::{ConfigSnapshot, EvalOutcome, Record};
    use archbo_core::design_space::DesignPoint;
    use archbo_core::turbofan::simple_turbofan_space;

    fn tiny_history() -> (DesignSpace, RunHistory) {
        let space = simple_turbofan_space();
        let mut rng = archbo_core::rng::substream(3, "doe");
        let points = space.sample_doe(3, &mut rng);
        let outcomes = [
            EvalOutcome::Failed,
            EvalOutcome::Ok { objective: 9.5, constraints: vec![0.2, -1.0] },
            EvalOutcome::Ok { objective: 8.25, constraints: vec![-0.1, -1.0] },
        ];
        let records: Vec<Record> = points
            .iter()
            .zip(outcomes)
            .enumerate()
            .map(|(i, (point, outcome))| Record {
                iteration: i,
                point: point.clone(),
                evaluation: Evaluation { outcome, wall_time: 0.0 },
                best_so_far: if i == 2 { Some(8.25) } else { None },
                fit_time: 0.0,
                infill_time: 0.0,
            })
            .collect();
        let final_best: Option<(DesignPoint, f64)> = Some((points[2].clone(), 8.25));
        let history = RunHistory {
            config: ConfigSnapshot { algorithm: "bo".to_string(), budget: 3, doe_size: 3 },
            seed: 3,
            records,
            final_best,
        };
        (space, history)
    }

    #[test]
    fn history_file_round_trips_and_flattens_the_outcome() {
        let (space, history) = tiny_history();
        let file = history_file(&space, &RunConfig::default(), &history);
        let json = to_pretty_string(&file);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["records"][0]["status"], "failed");
        assert_eq!(value["records"][1]["status"], "ok");
        assert_eq!(value["records"][1]["objective"], 9.5);
        assert!(value["records"][1]["point"]["BPR"].is_number());
        let back: HistoryFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.records.len(), 3);
        assert_eq!(back.records[1].evaluation.outcome.objective(), Some(9.5));
        assert_eq!(back.final_best.unwrap().objective, 8.25);
    }

    #[test]
    fn convergence_rows_match_the_contract() {
        let (_, history) = tiny_history();
        let csv_bytes = convergence_csv(&history).unwrap();
        let text = String::from_utf8(csv_bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "eval_index,status,objective,feasible,best_so_far");
        assert_eq!(lines[1], "0,failed,,false,");
        assert_eq!(lines[2], "1,ok,9.5,false,");
        assert_eq!(lines[3], "2,ok,8.25,true,8.25");
    }

    #[test]
    fn summary_counts_failures_and_echoes_the_best() {
        let (_, history) = tiny_history();
        let summary = summary(&RunConfig::default(), &history, 1.5);
        assert_eq!(summary.n_fe, 3);
        assert_eq!(summary.n_failed, 1);
        assert_eq!(summary.best_objective, Some(8.25));
        assert!(summary.feasible);
        assert_eq!(summary.wall_time, 1.5);
    }

    #[test]
    fn atomic_writes_leave_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.json");
        write_atomic(&path, b"{}\n").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"{}\n");
        let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(entries.len(), 1);
    }
}
