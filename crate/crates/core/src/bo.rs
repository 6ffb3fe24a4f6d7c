//! Sequential surrogate-driven optimization loop.
//!
//! [`run_bo`] alternates four phases under a fixed evaluation budget:
//! a Latin-hypercube design of experiments, Gaussian-process fits for the
//! objective and each constraint (plus an evaluability classifier over all
//! points, crashed ones included), a constrained infill solve, and one
//! evaluation of the proposed point. Crashed evaluations consume budget
//! but never enter the objective or constraint training sets.
//!
//! Timing is injected through [`Clock`] so the crate stays `no_std`; the
//! default [`NoClock`] stamps zeros, which keeps serialized histories
//! byte-identical across machines.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::acquisition::{solve_infill, AcquisitionError, AcquisitionSpec, ModelSet};
use crate::design_space::{DesignPoint, SpaceError};
use crate::linalg::Matrix;
use crate::rng::substream;
use crate::surrogate::{fit_feasibility, fit_gp, GpConfig, SurrogateError};

/// A constraint value c is treated as satisfied when c <= this tolerance.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

/// A black-box optimization problem over a mixed hierarchical space.
///
/// `evaluate` must be deterministic for a fixed point: the drivers rely on
/// that when they refuse to revisit already-evaluated points.
pub trait Problem {
    fn space(&self) -> &crate::design_space::DesignSpace;
    fn n_constraints(&self) -> usize;
    fn evaluate(&self, point: &DesignPoint) -> EvalOutcome;
}

/// What the black box reported for one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EvalOutcome {
    /// The simulation converged; constraints use the c <= 0 convention.
    Ok { objective: f64, constraints: Vec<f64> },
    /// The simulation crashed or failed to converge; no values available.
    Failed,
}

impl EvalOutcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, EvalOutcome::Ok { .. })
    }

    /// True when the point converged and every constraint is within tolerance.
    pub fn is_feasible(&self) -> bool {
        match self {
            EvalOutcome::Ok { constraints, .. } => {
                constraints.iter().all(|&c| c <= FEASIBILITY_TOLERANCE)
            }
            EvalOutcome::Failed => false,
        }
    }

    pub fn objective(&self) -> Option<f64> {
        match self {
            EvalOutcome::Ok { objective, .. } => Some(*objective),
            EvalOutcome::Failed => None,
        }
    }
}

/// One recorded call to the black box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    #[serde(flatten)]
    pub outcome: EvalOutcome,
    /// Seconds spent inside the black box, as measured by the run's clock.
    pub wall_time: f64,
}

/// Source of timestamps for the drivers, in seconds from an arbitrary origin.
pub trait Clock {
    fn now(&self) -> f64;
}

/// Clock that always reads zero, making every recorded duration zero.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

/// The settings a run was launched with, echoed into its history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub algorithm: String,
    pub budget: usize,
    pub doe_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub iteration: usize,
    pub point: DesignPoint,
    pub evaluation: Evaluation,
    /// Best feasible objective among records up to and including this one.
    pub best_so_far: Option<f64>,
    pub fit_time: f64,
    pub infill_time: f64,
}

/// Complete trace of a run: every evaluation in order plus the final best.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub config: ConfigSnapshot,
    pub seed: u64,
    pub records: Vec<Record>,
    pub final_best: Option<(DesignPoint, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoError {
    BadConfig(&'static str),
    /// Too few convergent points to fit a surrogate, even after one fresh
    /// design-of-experiments batch.
    DoeStarvation { ok_points: usize },
    Surrogate(SurrogateError),
    Acquisition(AcquisitionError),
    Space(SpaceError),
}

impl core::fmt::Display for BoError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BoError::BadConfig(msg) => write!(f, "bad run configuration: {msg}"),
            BoError::DoeStarvation { ok_points } => write!(
                f,
                "design of experiments starved: only {ok_points} convergent points after retry"
            ),
            BoError::Surrogate(e) => write!(f, "surrogate fit failed: {e}"),
            BoError::Acquisition(e) => write!(f, "infill search failed: {e}"),
            BoError::Space(e) => write!(f, "design space error: {e}"),
        }
    }
}

impl core::error::Error for BoError {}

impl From<SurrogateError> for BoError {
    fn from(e: SurrogateError) -> Self {
        BoError::Surrogate(e)
    }
}

impl From<AcquisitionError> for BoError {
    fn from(e: AcquisitionError) -> Self {
        BoError::Acquisition(e)
    }
}

impl From<SpaceError> for BoError {
    fn from(e: SpaceError) -> Self {
        BoError::Space(e)
    }
}

/// Default design-of-experiments size for a given budget.
pub fn default_doe_size(budget: usize) -> usize {
    (budget / 3).clamp(1, 20)
}

/// Best feasible record of a history, if any.
pub fn incumbent(records: &[Record]) -> Option<(DesignPoint, f64)> {
    let mut best: Option<(&Record, f64)> = None;
    for record in records {
        if !record.evaluation.outcome.is_feasible() {
            continue;
        }
        let objective = record.evaluation.outcome.objective()?;
        match best {
            Some((_, current)) if current <= objective => {}
            _ => best = Some((record, objective)),
        }
    }
    best.map(|(record, objective)| (record.point.clone(), objective))
}

pub(crate) struct Recorder<'a, C: Clock> {
    pub(crate) records: Vec<Record>,
    best: Option<f64>,
    clock: &'a C,
}

impl<'a, C: Clock> Recorder<'a, C> {
    pub(crate) fn new(clock: &'a C) -> Self {
        Recorder { records: Vec::new(), best: None, clock }
    }

    pub(crate) fn evaluate_and_push<P: Problem>(
        &mut self,
        problem: &P,
        point: DesignPoint,
        fit_time: f64,
        infill_time: f64,
    ) {
        let started = self.clock.now();
        let outcome = problem.evaluate(&point);
        let wall_time = self.clock.now() - started;
        if outcome.is_feasible() {
            if let Some(objective) = outcome.objective() {
                self.best = Some(match self.best {
                    Some(current) => current.min(objective),
                    None => objective,
                });
            }
        }
        self.records.push(Record {
            iteration: self.records.len(),
            point,
            evaluation: Evaluation { outcome, wall_time },
            best_so_far: self.best,
            fit_time,
            infill_time,
        });
    }

    pub(crate) fn ok_count(&self) -> usize {
        self.records.iter().filter(|r| r.evaluation.outcome.is_ok()).count()
    }
}

/// Run the full loop and return one record per evaluation, crashed ones
/// included, so the record count always equals `budget`.
pub fn run_bo<P: Problem, C: Clock>(
    problem: &P,
    doe_size: usize,
    budget: usize,
    acq_spec: &AcquisitionSpec,
    gp_config: &GpConfig,
    seed: u64,
    clock: &C,
) -> Result<RunHistory, BoError> {
    if doe_size == 0 {
        return Err(BoError::BadConfig("doe_size must be at least 1"));
    }
    if budget <= doe_size {
        return Err(BoError::BadConfig("budget must exceed doe_size"));
    }

    let space = problem.space();
    let mut doe_rng = substream(seed, "doe");
    let mut fit_rng = substream(seed, "fit");
    let mut infill_rng = substream(seed, "infill");

    let mut recorder = Recorder::new(clock);
    for point in space.sample_doe(doe_size, &mut doe_rng) {
        recorder.evaluate_and_push(problem, point, 0.0, 0.0);
    }

    if recorder.ok_count() < 2 {
        let retry = doe_size.min(budget - recorder.records.len());
        for point in space.sample_doe(retry, &mut doe_rng) {
            recorder.evaluate_and_push(problem, point, 0.0, 0.0);
        }
        if recorder.ok_count() < 2 {
            return Err(BoError::DoeStarvation { ok_points: recorder.ok_count() });
        }
    }

    let n_constraints = problem.n_constraints();
    while recorder.records.len() < budget {
        let fit_started = clock.now();
        let mut ok_rows = Vec::new();
        let mut objectives = Vec::new();
        let mut constraint_values = alloc::vec![Vec::new(); n_constraints];
        let mut all_rows = Vec::new();
        let mut labels = Vec::new();
        let mut f_min: Option<f64> = None;
        for record in &recorder.records {
            let encoded = space.encode(&record.point);
            labels.push(if record.evaluation.outcome.is_ok() { 1.0 } else { 0.0 });
            all_rows.push(encoded.clone());
            if let EvalOutcome::Ok { objective, constraints } = &record.evaluation.outcome {
                ok_rows.push(encoded);
                objectives.push(*objective);
                for (j, &c) in constraints.iter().enumerate() {
                    constraint_values[j].push(c);
                }
                if record.evaluation.outcome.is_feasible() {
                    f_min = Some(match f_min {
                        Some(current) => current.min(*objective),
                        None => *objective,
                    });
                }
            }
        }

        let x_ok = Matrix::from_rows(&ok_rows);
        let objective_model = fit_gp(&x_ok, &objectives, gp_config, &mut fit_rng)?;
        let mut constraint_models = Vec::with_capacity(n_constraints);
        for values in &constraint_values {
            constraint_models.push(fit_gp(&x_ok, values, gp_config, &mut fit_rng)?);
        }
        let feasibility =
            fit_feasibility(&Matrix::from_rows(&all_rows), &labels, gp_config, &mut fit_rng)?;
        let models = ModelSet {
            objective: objective_model,
            constraints: constraint_models,
            feasibility: Some(feasibility),
        };
        let fit_time = clock.now() - fit_started;

        let infill_started = clock.now();
        let infill = solve_infill(space, &models, f_min, acq_spec, &mut infill_rng)?;
        let infill_time = clock.now() - infill_started;

        recorder.evaluate_and_push(problem, infill.point, fit_time, infill_time);
    }

    let final_best = incumbent(&recorder.records);
    Ok(RunHistory {
        config: ConfigSnapshot {
            algorithm: String::from("bo"),
            budget,
            doe_size,
        },
        seed,
        records: recorder.records,
        final_best,
    })
}
