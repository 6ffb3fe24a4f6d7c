//! Evolutionary baseline for the same problems the surrogate loop solves.
//!
//! Single objective plus constraints, so the NSGA-II machinery degenerates
//! to a generational GA with Deb's constraint domination; crowding distance
//! survives only as a tie-break on the encoded vectors. Crashed evaluations
//! get a fixed, huge violation so selection treats them as worse than any
//! convergent point.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bo::{Clock, ConfigSnapshot, EvalOutcome, Problem, Recorder, RunHistory};
use crate::design_space::{DesignPoint, DesignSpace};
use crate::rng::substream;
use crate::variation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvoConfig {
    pub population: usize,
    pub crossover_prob: f64,
    pub sbx_eta: f64,
    pub mutation_eta: f64,
    /// Per-gene mutation probability; `None` means 1 / n_variables.
    pub mutation_prob: Option<f64>,
    /// Constraint violation assigned to crashed evaluations.
    pub failed_violation: f64,
}

impl Default for EvoConfig {
    fn default() -> Self {
        EvoConfig {
            population: 50,
            crossover_prob: 0.9,
            sbx_eta: 15.0,
            mutation_eta: 20.0,
            mutation_prob: None,
            failed_violation: 1e6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvoError {
    BadConfig(&'static str),
}

impl core::fmt::Display for EvoError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EvoError::BadConfig(msg) => write!(f, "bad evolutionary configuration: {msg}"),
        }
    }
}

impl core::error::Error for EvoError {}

/// Total constraint violation of an outcome under the c <= 0 convention.
pub fn violation(outcome: &EvalOutcome, failed_violation: f64) -> f64 {
    match outcome {
        EvalOutcome::Ok { constraints, .. } => {
            constraints.iter().map(|&c| c.max(0.0)).sum()
        }
        EvalOutcome::Failed => failed_violation,
    }
}

/// Deb's constraint-domination rule for a single objective.
pub fn constrained_dominates(a: &EvalOutcome, b: &EvalOutcome, failed_violation: f64) -> bool {
    match (a.is_feasible(), b.is_feasible()) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => match (a.objective(), b.objective()) {
            (Some(fa), Some(fb)) => fa < fb,
            _ => false,
        },
        (false, false) => violation(a, failed_violation) < violation(b, failed_violation),
    }
}

struct Ranked {
    class: u8,
    key: f64,
    encoded: Vec<f64>,
}

fn rank_of(outcome: &EvalOutcome, failed_violation: f64) -> (u8, f64) {
    if outcome.is_feasible() {
        (0, outcome.objective().unwrap_or(f64::INFINITY))
    } else {
        (1, violation(outcome, failed_violation))
    }
}

/// Crowding distances over a set of encoded vectors, larger = lonelier.
fn crowding_distances(encoded: &[&[f64]]) -> Vec<f64> {
    let n = encoded.len();
    let mut distances = alloc::vec![0.0f64; n];
    if n < 3 {
        for d in distances.iter_mut() {
            *d = f64::INFINITY;
        }
        return distances;
    }
    let dim = encoded[0].len();
    let mut order: Vec<usize> = (0..n).collect();
    for axis in 0..dim {
        order.sort_by(|&a, &b| encoded[a][axis].total_cmp(&encoded[b][axis]));
        let low = encoded[order[0]][axis];
        let high = encoded[order[n - 1]][axis];
        let range = high - low;
        if range <= 0.0 {
            continue;
        }
        distances[order[0]] = f64::INFINITY;
        distances[order[n - 1]] = f64::INFINITY;
        for w in 1..n - 1 {
            let gap = encoded[order[w + 1]][axis] - encoded[order[w - 1]][axis];
            distances[order[w]] += gap / range;
        }
    }
    distances
}

/// Elitist truncation of parents + offspring down to `population` survivors.
///
/// Orders by (feasibility class, objective or violation), breaks exact key
/// ties by crowding distance, and drops exact encoded duplicates while any
/// distinct individual remains to take their place.
fn select_survivors(
    space: &DesignSpace,
    combined: Vec<(DesignPoint, EvalOutcome)>,
    population: usize,
    failed_violation: f64,
) -> Vec<(DesignPoint, EvalOutcome)> {
    let ranked: Vec<Ranked> = combined
        .iter()
        .map(|(point, outcome)| {
            let (class, key) = rank_of(outcome, failed_violation);
            Ranked { class, key, encoded: space.encode(point) }
        })
        .collect();

    let mut order: Vec<usize> = (0..combined.len()).collect();
    order.sort_by(|&a, &b| {
        ranked[a]
            .class
            .cmp(&ranked[b].class)
            .then(ranked[a].key.total_cmp(&ranked[b].key))
    });

    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len()
            && ranked[order[end]].class == ranked[order[start]].class
            && ranked[order[end]].key.total_cmp(&ranked[order[start]].key).is_eq()
        {
            end += 1;
        }
        if end - start > 1 {
            let group: Vec<&[f64]> =
                order[start..end].iter().map(|&i| ranked[i].encoded.as_slice()).collect();
            let distances = crowding_distances(&group);
            let mut tied: Vec<(usize, f64)> =
                order[start..end].iter().copied().zip(distances).collect();
            tied.sort_by(|a, b| b.1.total_cmp(&a.1));
            for (slot, (idx, _)) in tied.into_iter().enumerate() {
                order[start + slot] = idx;
            }
        }
        start = end;
    }

    let mut kept: Vec<usize> = Vec::with_capacity(population);
    let mut skipped: Vec<usize> = Vec::new();
    for &idx in &order {
        if kept.iter().any(|&k| ranked[k].encoded == ranked[idx].encoded) {
            skipped.push(idx);
        } else {
            kept.push(idx);
        }
    }
    kept.extend(skipped);
    kept.truncate(population);

    let mut chosen: Vec<Option<(DesignPoint, EvalOutcome)>> =
        combined.into_iter().map(Some).collect();
    kept.into_iter().map(|idx| chosen[idx].take().expect("each survivor chosen once")).collect()
}

fn tournament_pick<R: Rng>(
    parents: &[(DesignPoint, EvalOutcome)],
    failed_violation: f64,
    rng: &mut R,
) -> usize {
    let a = rng.gen_range(0..parents.len());
    let b = rng.gen_range(0..parents.len());
    if constrained_dominates(&parents[b].1, &parents[a].1, failed_violation) {
        b
    } else {
        a
    }
}

/// Run the generational loop until exactly `budget` evaluations are spent.
pub fn run_nsga2<P: Problem, C: Clock>(
    problem: &P,
    budget: usize,
    config: &EvoConfig,
    seed: u64,
    clock: &C,
) -> Result<RunHistory, EvoError> {
    if config.population < 4 || config.population % 2 != 0 {
        return Err(EvoError::BadConfig("population must be even and at least 4"));
    }
    if !(0.0..=1.0).contains(&config.crossover_prob) {
        return Err(EvoError::BadConfig("crossover_prob must lie in [0, 1]"));
    }
    if let Some(p) = config.mutation_prob {
        if !(0.0..=1.0).contains(&p) {
            return Err(EvoError::BadConfig("mutation_prob must lie in [0, 1]"));
        }
    }
    if !(config.sbx_eta > 0.0) || !(config.mutation_eta > 0.0) {
        return Err(EvoError::BadConfig("distribution indices must be positive"));
    }
    if !(config.failed_violation > 0.0) {
        return Err(EvoError::BadConfig("failed_violation must be positive"));
    }
    if budget < config.population {
        return Err(EvoError::BadConfig("budget must cover the initial population"));
    }

    let space = problem.space();
    let n_vars = space.variables.len();
    let mutation_prob = config.mutation_prob.unwrap_or(1.0 / n_vars.max(1) as f64);
    let mut rng = substream(seed, "evo");

    let mut recorder = Recorder::new(clock);
    let mut parents: Vec<(DesignPoint, EvalOutcome)> = Vec::with_capacity(config.population);
    for point in space.sample_doe(config.population, &mut rng) {
        recorder.evaluate_and_push(problem, point.clone(), 0.0, 0.0);
        let outcome = recorder.records.last().expect("just pushed").evaluation.outcome.clone();
        parents.push((point, outcome));
    }

    while recorder.records.len() < budget {
        let mut offspring_points: Vec<DesignPoint> = Vec::with_capacity(config.population);
        while offspring_points.len() < config.population {
            let a = tournament_pick(&parents, config.failed_violation, &mut rng);
            let b = tournament_pick(&parents, config.failed_violation, &mut rng);
            let (g1, g2) = variation::crossover(
                space,
                &parents[a].0.values,
                &parents[b].0.values,
                config.crossover_prob,
                config.sbx_eta,
                &mut rng,
            );
            for mut genotype in [g1, g2] {
                if offspring_points.len() == config.population {
                    break;
                }
                variation::mutate(space, &mut genotype, mutation_prob, config.mutation_eta, &mut rng);
                let point = space.correct(&genotype).expect("variation stays within declared bounds");
                offspring_points.push(point);
            }
        }
        offspring_points.truncate(budget - recorder.records.len());

        let mut combined = parents;
        for point in offspring_points {
            recorder.evaluate_and_push(problem, point.clone(), 0.0, 0.0);
            let outcome = recorder.records.last().expect("just pushed").evaluation.outcome.clone();
            combined.push((point, outcome));
        }
        parents = select_survivors(space, combined, config.population, config.failed_violation);
    }

    let final_best = crate::bo::incumbent(&recorder.records);
    Ok(RunHistory {
        config: ConfigSnapshot {
            algorithm: String::from("nsga2"),
            budget,
            doe_size: config.population,
        },
        seed,
        records: recorder.records,
        final_best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bo::NoClock;
    use crate::design_space::{Value, VariableKind, VariableSpec};

    fn line_space() -> DesignSpace {
        DesignSpace {
            variables: vec![VariableSpec {
                name: "x".into(),
                kind: VariableKind::Continuous { lower: 0.0, upper: 1.0 },
            }],
            activation_rules: vec![],
            value_rules: vec![],
            signature_vars: vec![],
        }
    }

    fn plane_space() -> DesignSpace {
        DesignSpace {
            variables: vec![
                VariableSpec {
                    name: "x".into(),
                    kind: VariableKind::Continuous { lower: 0.0, upper: 1.0 },
                },
                VariableSpec {
                    name: "y".into(),
                    kind: VariableKind::Continuous { lower: 0.0, upper: 1.0 },
                },
            ],
            activation_rules: vec![],
            value_rules: vec![],
            signature_vars: vec![],
        }
    }

    fn x_of(point: &DesignPoint) -> f64 {
        match point.values[0] {
            Value::Continuous(v) => v,
            other => panic!("expected continuous, got {other:?}"),
        }
    }

    fn ok(objective: f64, constraints: &[f64]) -> EvalOutcome {
        EvalOutcome::Ok { objective, constraints: constraints.to_vec() }
    }

    struct Sphere {
        space: DesignSpace,
    }

    impl Problem for Sphere {
        fn space(&self) -> &DesignSpace {
            &self.space
        }

        fn n_constraints(&self) -> usize {
            0
        }

        fn evaluate(&self, point: &DesignPoint) -> EvalOutcome {
            let total: f64 = point
                .values
                .iter()
                .map(|v| match v {
                    Value::Continuous(x) => (x - 0.6) * (x - 0.6),
                    _ => 0.0,
                })
                .sum();
            EvalOutcome::Ok { objective: total, constraints: vec![] }
        }
    }

    struct HalfLine {
        space: DesignSpace,
    }

    impl Problem for HalfLine {
        fn space(&self) -> &DesignSpace {
            &self.space
        }

        fn n_constraints(&self) -> usize {
            1
        }

        fn evaluate(&self, point: &DesignPoint) -> EvalOutcome {
            let x = x_of(point);
            EvalOutcome::Ok { objective: x, constraints: vec![0.5 - x] }
        }
    }

    struct CrashRegion {
        space: DesignSpace,
    }

    impl Problem for CrashRegion {
        fn space(&self) -> &DesignSpace {
            &self.space
        }

        fn n_constraints(&self) -> usize {
            0
        }

        fn evaluate(&self, point: &DesignPoint) -> EvalOutcome {
            let x = x_of(point);
            if x > 0.8 {
                EvalOutcome::Failed
            } else {
                EvalOutcome::Ok { objective: (x - 0.3) * (x - 0.3), constraints: vec![] }
            }
        }
    }

    #[test]
    fn defaults_match_the_documented_values() {
        let config = EvoConfig::default();
        assert_eq!(config.population, 50);
        assert_eq!(config.crossover_prob, 0.9);
        assert_eq!(config.sbx_eta, 15.0);
        assert_eq!(config.mutation_eta, 20.0);
        assert_eq!(config.mutation_prob, None);
        assert_eq!(config.failed_violation, 1e6);
    }

    #[test]
    fn domination_follows_the_three_rules() {
        let v = 1e6;
        assert!(constrained_dominates(&ok(7.0, &[-0.1]), &EvalOutcome::Failed, v));
        assert!(!constrained_dominates(&EvalOutcome::Failed, &ok(7.0, &[-0.1]), v));
        assert!(constrained_dominates(&ok(6.7, &[]), &ok(7.0, &[]), v));
        assert!(!constrained_dominates(&ok(7.0, &[]), &ok(6.7, &[]), v));
        assert!(!constrained_dominates(&ok(6.7, &[]), &ok(6.7, &[]), v));
        assert!(constrained_dominates(&ok(9.0, &[0.2]), &ok(1.0, &[0.5]), v));
        assert!(constrained_dominates(&ok(9.0, &[0.2]), &EvalOutcome::Failed, v));
        assert!(!constrained_dominates(&EvalOutcome::Failed, &EvalOutcome::Failed, v));
    }

    #[test]
    fn violation_sums_only_positive_parts() {
        assert_eq!(violation(&ok(1.0, &[-0.3, 0.2, 0.05]), 1e6), 0.25);
        assert_eq!(violation(&ok(1.0, &[-0.3, -0.2]), 1e6), 0.0);
        assert_eq!(violation(&EvalOutcome::Failed, 123.0), 123.0);
    }

    #[test]
    fn budget_is_spent_exactly_even_mid_generation() {
        let problem = Sphere { space: plane_space() };
        let config = EvoConfig { population: 6, ..EvoConfig::default() };
        let history = run_nsga2(&problem, 23, &config, 77, &NoClock).unwrap();
        assert_eq!(history.records.len(), 23);
        assert_eq!(history.config.algorithm, "nsga2");
        assert_eq!(history.config.budget, 23);
        assert_eq!(history.config.doe_size, 6);
        for (i, record) in history.records.iter().enumerate() {
            assert_eq!(record.iteration, i);
        }
    }

    #[test]
    fn same_seed_means_identical_histories() {
        let problem = CrashRegion { space: line_space() };
        let config = EvoConfig { population: 8, ..EvoConfig::default() };
        let a = run_nsga2(&problem, 30, &config, 4, &NoClock).unwrap();
        let b = run_nsga2(&problem, 30, &config, 4, &NoClock).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_variation_only_replays_initial_points() {
        let problem = Sphere { space: plane_space() };
        let config = EvoConfig {
            population: 6,
            crossover_prob: 0.0,
            mutation_prob: Some(0.0),
            ..EvoConfig::default()
        };
        let history = run_nsga2(&problem, 24, &config, 9, &NoClock).unwrap();
        let initial: Vec<Vec<f64>> = history.records[..6]
            .iter()
            .map(|r| problem.space.encode(&r.point))
            .collect();
        for record in &history.records[6..] {
            let encoded = problem.space.encode(&record.point);
            assert!(
                initial.contains(&encoded),
                "iteration {} invented a new point without variation",
                record.iteration
            );
        }
    }

    #[test]
    fn zero_variation_survival_keeps_the_multiset() {
        let space = plane_space();
        let problem = Sphere { space: plane_space() };
        let mut rng = substream(2, "evo");
        let parents: Vec<(DesignPoint, EvalOutcome)> = space
            .sample_doe(6, &mut rng)
            .into_iter()
            .map(|p| {
                let outcome = problem.evaluate(&p);
                (p, outcome)
            })
            .collect();
        let mut combined = parents.clone();
        combined.extend(parents.iter().take(4).cloned());
        let survivors = select_survivors(&space, combined, 6, 1e6);

        let mut expected: Vec<f64> =
            parents.iter().filter_map(|(_, o)| o.objective()).collect();
        let mut got: Vec<f64> = survivors.iter().filter_map(|(_, o)| o.objective()).collect();
        expected.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        assert_eq!(got, expected);
    }

    #[test]
    fn survivors_prefer_distinct_points_over_clones() {
        let space = line_space();
        let best = space.correct(&[Value::Continuous(0.1)]).unwrap();
        let other = space.correct(&[Value::Continuous(0.9)]).unwrap();
        let combined = vec![
            (best.clone(), ok(1.0, &[])),
            (best.clone(), ok(1.0, &[])),
            (best.clone(), ok(1.0, &[])),
            (other.clone(), ok(5.0, &[])),
        ];
        let survivors = select_survivors(&space, combined, 2, 1e6);
        let values: Vec<f64> = survivors.iter().map(|(p, _)| x_of(p)).collect();
        assert!(values.contains(&0.1));
        assert!(values.contains(&0.9), "the worse but distinct point must survive, got {values:?}");
    }

    #[test]
    fn constrained_run_converges_to_the_feasible_boundary() {
        let problem = HalfLine { space: line_space() };
        let config = EvoConfig { population: 10, ..EvoConfig::default() };
        let history = run_nsga2(&problem, 80, &config, 21, &NoClock).unwrap();
        let (point, objective) = history.final_best.expect("feasible best");
        assert!(x_of(&point) >= 0.5 - crate::bo::FEASIBILITY_TOLERANCE);
        assert!(objective < 0.6, "expected progress toward 0.5, got {objective}");
    }

    #[test]
    fn crashes_are_recorded_and_selected_against() {
        let problem = CrashRegion { space: line_space() };
        let config = EvoConfig { population: 8, ..EvoConfig::default() };
        let history = run_nsga2(&problem, 48, &config, 6, &NoClock).unwrap();
        assert_eq!(history.records.len(), 48);
        let (point, objective) = history.final_best.expect("feasible best");
        assert!(x_of(&point) <= 0.8);
        assert!(objective < 0.05, "expected progress toward 0.3, got {objective}");
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let problem = Sphere { space: plane_space() };
        let odd = EvoConfig { population: 7, ..EvoConfig::default() };
        assert_eq!(
            run_nsga2(&problem, 50, &odd, 1, &NoClock),
            Err(EvoError::BadConfig("population must be even and at least 4"))
        );
        let tiny = EvoConfig { population: 2, ..EvoConfig::default() };
        assert!(run_nsga2(&problem, 50, &tiny, 1, &NoClock).is_err());
        let starved = EvoConfig { population: 50, ..EvoConfig::default() };
        assert_eq!(
            run_nsga2(&problem, 49, &starved, 1, &NoClock),
            Err(EvoError::BadConfig("budget must cover the initial population"))
        );
        let wild = EvoConfig { crossover_prob: 1.5, ..EvoConfig::default() };
        assert!(run_nsga2(&problem, 100, &wild, 1, &NoClock).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = EvoConfig { population: 12, mutation_prob: Some(0.25), ..EvoConfig::default() };
        let text = serde_json::to_string(&config).unwrap();
        assert_eq!(serde_json::from_str::<EvoConfig>(&text).unwrap(), config);
        let partial: EvoConfig = serde_json::from_str("{\"population\": 8}").unwrap();
        assert_eq!(partial.population, 8);
        assert_eq!(partial.crossover_prob, 0.9);
    }
}
