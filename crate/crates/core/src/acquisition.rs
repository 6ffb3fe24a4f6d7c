//! Infill criteria and the constrained infill subproblem.
//!
//! The criteria are expected improvement and its mean-regularized
//! variants (WB2 subtracts the predicted mean; WB2S scales EI before
//! subtracting, which keeps the criterion from collapsing to a spike
//! around the incumbent). Any criterion can additionally be weighted by
//! the predicted probability that the evaluation succeeds at all, which
//! steers the search away from regions where the black box tends to
//! fail.
//!
//! The infill subproblem maximizes the criterion over corrected points
//! subject to an optimistic trust bound on every constraint surrogate,
//! `mean_j(x) - kappa * std_j(x) <= 0`. A mixed-variable evolutionary
//! search handles the discrete and hierarchical structure; a coordinate
//! search then polishes the active continuous coordinates of the best
//! candidate. Points indistinguishable from training data in encoded
//! space are rejected so the next fit stays well posed.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::design_space::{DesignPoint, DesignSpace, SpaceError, VariableKind};
use crate::search::{coordinate_search, SearchOptions};
use crate::stats::normal_cdf;
use crate::stats::normal_pdf;
use crate::surrogate::{FeasibilityModel, GpModel, SurrogateError, MERGE_DISTANCE};
use crate::variation;

const INNER_CROSSOVER_PROB: f64 = 0.9;
const INNER_SBX_ETA: f64 = 15.0;
const INNER_MUTATION_ETA: f64 = 20.0;

/// Infill criterion family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Ei,
    Wb2,
    Wb2s,
}

/// Budget of the inner evolutionary solve and its local polish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerBudget {
    pub population: usize,
    pub generations: usize,
    pub polish_evals: usize,
}

impl Default for InnerBudget {
    fn default() -> Self {
        InnerBudget { population: 50, generations: 50, polish_evals: 200 }
    }
}

/// Acquisition configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionSpec {
    pub criterion: Criterion,
    /// WB2S scale constant.
    pub beta: f64,
    /// Multiply the criterion by the predicted evaluation-success
    /// probability.
    pub feasibility_weighting: bool,
    /// Trust-bound multiplier on constraint surrogates.
    pub kappa: f64,
    pub inner_budget: InnerBudget,
}

impl Default for AcquisitionSpec {
    fn default() -> Self {
        AcquisitionSpec {
            criterion: Criterion::Wb2s,
            beta: 100.0,
            feasibility_weighting: true,
            kappa: 2.0,
            inner_budget: InnerBudget::default(),
        }
    }
}

/// The surrogates one infill decision consumes.
#[derive(Debug, Clone)]
pub struct ModelSet {
    pub objective: GpModel,
    pub constraints: Vec<GpModel>,
    pub feasibility: Option<FeasibilityModel>,
}

/// Typed acquisition failure.
#[derive(Debug, Clone, PartialEq)]
pub enum AcquisitionError {
    InvalidSpec(&'static str),
    /// Feasibility weighting requested without a fitted classifier.
    MissingFeasibilityModel,
    Surrogate(SurrogateError),
    Space(SpaceError),
    /// Every candidate coincided with a training point in encoded space.
    NoNovelCandidate,
}

impl fmt::Display for AcquisitionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AcquisitionError::InvalidSpec(msg) => write!(f, "invalid acquisition spec: {msg}"),
            AcquisitionError::MissingFeasibilityModel => {
                write!(f, "feasibility weighting is on but no feasibility model was provided")
            }
            AcquisitionError::Surrogate(e) => write!(f, "surrogate failure: {e}"),
            AcquisitionError::Space(e) => write!(f, "design-space failure: {e}"),
            AcquisitionError::NoNovelCandidate => {
                write!(f, "every infill candidate duplicates a training point")
            }
        }
    }
}

impl core::error::Error for AcquisitionError {}

impl From<SurrogateError> for AcquisitionError {
    fn from(e: SurrogateError) -> Self {
        AcquisitionError::Surrogate(e)
    }
}

impl From<SpaceError> for AcquisitionError {
    fn from(e: SpaceError) -> Self {
        AcquisitionError::Space(e)
    }
}

/// Outcome of one infill solve. `trust_violation` is zero when the
/// returned point satisfies every constraint trust bound; otherwise the
/// point is the least-violating candidate found.
#[derive(Debug, Clone, PartialEq)]
pub struct InfillResult {
    pub point: DesignPoint,
    pub acquisition: f64,
    pub trust_violation: f64,
}

/// Expected improvement over `f_min` under a normal prediction.
/// Degenerate `std = 0` collapses to the deterministic improvement
/// `max(0, f_min - mean)`.
pub fn expected_improvement(mean: f64, std: f64, f_min: f64) -> f64 {
    if std <= 0.0 {
        return (f_min - mean).max(0.0);
    }
    let z = (f_min - mean) / std;
    let value = (f_min - mean) * normal_cdf(z) + std * normal_pdf(z);
    value.max(0.0)
}

/// WB2S scale from the predicted mean and EI at the preliminary EI
/// argmax: `max(1, beta * |mean| / ei)`, or 1 when EI has vanished.
pub fn wb2s_scale_from(mean: f64, ei: f64, beta: f64) -> f64 {
    if ei > 1e-12 {
        (beta * libm::fabs(mean) / ei).max(1.0)
    } else {
        1.0
    }
}

/// WB2S scale evaluated on a model at the inner solver's best EI point.
pub fn wb2s_scale(
    space: &DesignSpace,
    ei_argmax: &DesignPoint,
    objective: &GpModel,
    f_min: f64,
    beta: f64,
) -> Result<f64, AcquisitionError> {
    let enc = space.encode(ei_argmax);
    let (mean, std) = objective.predict(&enc)?;
    Ok(wb2s_scale_from(mean, expected_improvement(mean, std, f_min), beta))
}

/// The infill criterion at one corrected point. `wb2s_scale` is the
/// scale fixed once per infill solve; it is ignored by EI and WB2.
pub fn acquisition_value(
    space: &DesignSpace,
    point: &DesignPoint,
    models: &ModelSet,
    f_min: f64,
    spec: &AcquisitionSpec,
    wb2s_scale: f64,
) -> Result<f64, AcquisitionError> {
    if spec.feasibility_weighting && models.feasibility.is_none() {
        return Err(AcquisitionError::MissingFeasibilityModel);
    }
    let enc = space.encode(point);
    criterion_at(&enc, models, f_min, spec.criterion, spec.feasibility_weighting, wb2s_scale)
}

fn criterion_at(
    enc: &[f64],
    models: &ModelSet,
    f_min: f64,
    criterion: Criterion,
    weighting: bool,
    scale: f64,
) -> Result<f64, AcquisitionError> {
    let (mean, std) = models.objective.predict(enc)?;
    let ei = expected_improvement(mean, std, f_min);
    let mut value = match criterion {
        Criterion::Ei => ei,
        Criterion::Wb2 => ei - mean,
        Criterion::Wb2s => scale * ei - mean,
    };
    if weighting {
        if let Some(fe) = &models.feasibility {
            value *= fe.predict_feasible_prob(enc)?;
        }
    }
    Ok(value)
}

/// Probability that every constraint surrogate predicts a satisfied
/// constraint, times the evaluation-success probability. Used instead of
/// the improvement criteria while no feasible observation exists yet.
fn feasibility_search_value(enc: &[f64], models: &ModelSet) -> Result<f64, AcquisitionError> {
    let mut value = 1.0;
    for c in &models.constraints {
        let (mean, std) = c.predict(enc)?;
        value *= if std > 0.0 {
            normal_cdf(-mean / std)
        } else if mean <= 0.0 {
            1.0
        } else {
            0.0
        };
    }
    if let Some(fe) = &models.feasibility {
        value *= fe.predict_feasible_prob(enc)?;
    }
    Ok(value)
}

/// Total trust-bound violation `sum_j max(0, mean_j - kappa * std_j)`.
fn trust_violation(enc: &[f64], models: &ModelSet, kappa: f64) -> Result<f64, AcquisitionError> {
    let mut total = 0.0;
    for c in &models.constraints {
        let (mean, std) = c.predict(enc)?;
        total += (mean - kappa * std).max(0.0);
    }
    Ok(total)
}

struct Candidate {
    point: DesignPoint,
    enc: Vec<f64>,
    /// `(trust violation, -criterion)`: smaller is better lexicographically.
    key: (f64, f64),
}

fn key_cmp(a: &(f64, f64), b: &(f64, f64)) -> core::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
}

struct InfillProblem<'a> {
    space: &'a DesignSpace,
    models: &'a ModelSet,
    spec: &'a AcquisitionSpec,
    f_min: Option<f64>,
    criterion: Criterion,
    scale: f64,
}

impl<'a> InfillProblem<'a> {
    fn key_of(&self, enc: &[f64]) -> Result<(f64, f64), AcquisitionError> {
        match self.f_min {
            Some(f_min) => {
                let value = criterion_at(
                    enc,
                    self.models,
                    f_min,
                    self.criterion,
                    self.spec.feasibility_weighting,
                    self.scale,
                )?;
                let violation = trust_violation(enc, self.models, self.spec.kappa)?;
                Ok((violation, -value))
            }
            None => {
                let value = feasibility_search_value(enc, self.models)?;
                Ok((0.0, -value))
            }
        }
    }

    fn candidate(&self, point: DesignPoint) -> Result<Candidate, AcquisitionError> {
        let enc = self.space.encode(&point);
        let key = self.key_of(&enc)?;
        Ok(Candidate { point, enc, key })
    }

    /// One full evolutionary run; returns the final population sorted
    /// best-first.
    fn evolve<R: Rng>(
        &self,
        population: usize,
        generations: usize,
        rng: &mut R,
    ) -> Result<Vec<Candidate>, AcquisitionError> {
        let n_vars = self.space.variables.len();
        let mutation_prob = if n_vars > 0 { 1.0 / n_vars as f64 } else { 1.0 };
        let mut pop: Vec<Candidate> = Vec::with_capacity(2 * population);
        for point in self.space.sample_doe(population, rng) {
            pop.push(self.candidate(point)?);
        }
        pop.sort_by(|a, b| key_cmp(&a.key, &b.key));

        for _ in 0..generations {
            let mut offspring: Vec<Candidate> = Vec::with_capacity(population);
            while offspring.len() < population {
                let p1 = tournament(&pop, rng);
                let p2 = tournament(&pop, rng);
                let (mut c1, mut c2) = variation::crossover(
                    self.space,
                    &pop[p1].point.values,
                    &pop[p2].point.values,
                    INNER_CROSSOVER_PROB,
                    INNER_SBX_ETA,
                    rng,
                );
                variation::mutate(self.space, &mut c1, mutation_prob, INNER_MUTATION_ETA, rng);
                variation::mutate(self.space, &mut c2, mutation_prob, INNER_MUTATION_ETA, rng);
                for raw in [c1, c2] {
                    if offspring.len() == population {
                        break;
                    }
                    let point = self.space.correct(&raw)?;
                    offspring.push(self.candidate(point)?);
                }
            }
            pop.append(&mut offspring);
            pop.sort_by(|a, b| key_cmp(&a.key, &b.key));
            pop.truncate(population);
        }
        Ok(pop)
    }

    /// Coordinate-search polish of the active continuous coordinates.
    fn polish(&self, best: &Candidate, max_evals: usize) -> Result<Candidate, AcquisitionError> {
        let mut coords = Vec::new();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut start = Vec::new();
        for (i, spec) in self.space.variables.iter().enumerate() {
            if !best.point.active[i] {
                continue;
            }
            if let VariableKind::Continuous { lower: lo, upper: hi } = spec.kind {
                if let crate::design_space::Value::Continuous(v) = best.point.values[i] {
                    coords.push(i);
                    lower.push(lo);
                    upper.push(hi);
                    start.push(v);
                }
            }
        }
        if coords.is_empty() || max_evals == 0 {
            return self.candidate(best.point.clone());
        }
        let opts = SearchOptions { initial_step: 0.25, min_step: 1e-4, max_evals };
        let mut values = best.point.values.clone();
        let (found, _) = coordinate_search(&start, &lower, &upper, &opts, |xs| {
            for (slot, x) in coords.iter().zip(xs) {
                values[*slot] = crate::design_space::Value::Continuous(*x);
            }
            match self.space.correct(&values) {
                Ok(point) => {
                    let enc = self.space.encode(&point);
                    self.key_of(&enc).unwrap_or((f64::INFINITY, f64::INFINITY))
                }
                Err(_) => (f64::INFINITY, f64::INFINITY),
            }
        });
        for (slot, x) in coords.iter().zip(&found) {
            values[*slot] = crate::design_space::Value::Continuous(*x);
        }
        self.candidate(self.space.correct(&values)?)
    }
}

fn tournament<R: Rng>(pop: &[Candidate], rng: &mut R) -> usize {
    let a = rng.gen_range(0..pop.len());
    let b = rng.gen_range(0..pop.len());
    if key_cmp(&pop[a].key, &pop[b].key) == core::cmp::Ordering::Less {
        a
    } else {
        b
    }
}

fn is_duplicate(enc: &[f64], training: &[Vec<f64>]) -> bool {
    training.iter().any(|row| {
        let mut d2 = 0.0;
        for (a, b) in enc.iter().zip(row) {
            let diff = a - b;
            d2 += diff * diff;
        }
        d2 < MERGE_DISTANCE * MERGE_DISTANCE
    })
}

fn training_rows(models: &ModelSet) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for i in 0..models.objective.x.rows() {
        rows.push(models.objective.x.row(i).to_vec());
    }
    if let Some(fe) = &models.feasibility {
        for i in 0..fe.inner.x.rows() {
            let row = fe.inner.x.row(i);
            if !is_duplicate(row, &rows) {
                rows.push(row.to_vec());
            }
        }
    }
    rows
}

fn validate_spec(spec: &AcquisitionSpec) -> Result<(), AcquisitionError> {
    if !(spec.beta > 0.0) {
        return Err(AcquisitionError::InvalidSpec("beta must be positive"));
    }
    if !(spec.kappa >= 0.0) {
        return Err(AcquisitionError::InvalidSpec("kappa must be nonnegative"));
    }
    if spec.inner_budget.population < 1 || spec.inner_budget.generations < 1 {
        return Err(AcquisitionError::InvalidSpec("inner budgets must be at least 1"));
    }
    Ok(())
}

/// Solves the constrained infill subproblem: maximize the criterion over
/// corrected points subject to the trust bounds, then polish, then reject
/// training-point duplicates. With `f_min` absent (no feasible
/// observation yet) the solve maximizes the constraint-satisfaction
/// probability times the evaluation-success probability instead, with no
/// trust-bound penalty.
///
/// For WB2S a preliminary half-length EI solve locates the EI argmax that
/// fixes the scale; the main solve then runs with the scaled criterion.
pub fn solve_infill<R: Rng>(
    space: &DesignSpace,
    models: &ModelSet,
    f_min: Option<f64>,
    spec: &AcquisitionSpec,
    rng: &mut R,
) -> Result<InfillResult, AcquisitionError> {
    validate_spec(spec)?;
    if spec.feasibility_weighting && models.feasibility.is_none() {
        return Err(AcquisitionError::MissingFeasibilityModel);
    }

    let budget = spec.inner_budget;
    let mut scale = 1.0;
    if spec.criterion == Criterion::Wb2s && f_min.is_some() {
        let preliminary = InfillProblem {
            space,
            models,
            spec,
            f_min,
            criterion: Criterion::Ei,
            scale: 1.0,
        };
        let stage = preliminary.evolve(budget.population, budget.generations.div_ceil(2), rng)?;
        let best = &stage[0];
        let (mean, std) = models.objective.predict(&best.enc)?;
        let f = f_min.unwrap_or(0.0);
        scale = wb2s_scale_from(mean, expected_improvement(mean, std, f), spec.beta);
    }

    let problem = InfillProblem { space, models, spec, f_min, criterion: spec.criterion, scale };
    let mut pool = problem.evolve(budget.population, budget.generations, rng)?;
    let polished = problem.polish(&pool[0], budget.polish_evals)?;
    pool.insert(0, polished);
    pool.sort_by(|a, b| key_cmp(&a.key, &b.key));

    let training = training_rows(models);
    if pool.iter().all(|c| is_duplicate(&c.enc, &training)) {
        // Tiny or exhausted spaces can leave the whole pool on training
        // points; a burst of fresh corrected samples is the last resort
        // before giving up.
        let rescue_points = space.sample_doe(4 * budget.population, rng);
        let mut rescue = Vec::with_capacity(rescue_points.len());
        for point in rescue_points {
            rescue.push(problem.candidate(point)?);
        }
        rescue.sort_by(|a, b| key_cmp(&a.key, &b.key));
        pool = rescue;
    }
    let chosen = pool
        .iter()
        .find(|c| !is_duplicate(&c.enc, &training))
        .ok_or(AcquisitionError::NoNovelCandidate)?;
    Ok(InfillResult {
        point: chosen.point.clone(),
        acquisition: -chosen.key.1,
        trust_violation: chosen.key.0,
    })
}
