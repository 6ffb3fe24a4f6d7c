//! The `run` command: execute one optimization and persist its trace.

use std::path::Path;
use std::time::Instant;

use archbo_core::bo::{default_doe_size, run_bo, Clock, NoClock, Problem, RunHistory};
use archbo_core::evo::run_nsga2;
use archbo_core::surrogate::{Anisotropy, GpConfig};

use crate::config::{build_problem, load_config, resolve_out_dir, Algorithm, RunConfig, RunOverrides};
use crate::output;
use crate::CliError;

/// Seconds since construction, measured on the OS monotonic clock.
pub struct WallClock {
    origin: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        WallClock { origin: Instant::now() }
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

enum RunClock {
    Zero(NoClock),
    Wall(WallClock),
}

impl Clock for RunClock {
    fn now(&self) -> f64 {
        match self {
            RunClock::Zero(clock) => clock.now(),
            RunClock::Wall(clock) => clock.now(),
        }
    }
}

pub fn cmd_run(
    config_path: Option<&Path>,
    overrides: &RunOverrides,
    timings: bool,
) -> Result<(), CliError> {
    let mut config = match config_path {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    config.apply(overrides);
    if config.budget == 0 {
        return Err(CliError::Config("budget must be positive".to_string()));
    }
    let problem = build_problem(&config.problem, &config.bench)?;
    let space = problem.space();

    // Resolve the pieces the algorithm will consume, so the echoed config
    // in history.json shows what actually ran.
    if config.algorithm == Algorithm::Bo {
        if config.doe_size.is_none() {
            config.doe_size = Some(default_doe_size(config.budget));
        }
        if config.gp.is_none() {
            config.gp = Some(GpConfig {
                anisotropy: Anisotropy::Grouped { groups: space.encoding_groups() },
                ..GpConfig::default()
            });
        }
    }
    let out_dir = resolve_out_dir(config.out_dir.take());

    let clock = if timings { RunClock::Wall(WallClock::new()) } else { RunClock::Zero(NoClock) };
    let started = Instant::now();
    let history: RunHistory = match config.algorithm {
        Algorithm::Bo => run_bo(
            &problem,
            config.doe_size.expect("resolved above"),
            config.budget,
            &config.acquisition,
            config.gp.as_ref().expect("resolved above"),
            config.seed,
            &clock,
        )
        .map_err(|e| CliError::Config(format!("run failed: {e}")))?,
        Algorithm::Nsga2 => run_nsga2(&problem, config.budget, &config.evo, config.seed, &clock)
            .map_err(|e| CliError::Config(format!("run failed: {e}")))?,
    };
    let wall_time = started.elapsed().as_secs_f64();

    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Io(format!("create {}: {e}", out_dir.display())))?;
    let file = output::history_file(space, &config, &history);
    output::write_json(&out_dir.join("history.json"), &file)?;
    output::write_atomic(&out_dir.join("convergence.csv"), &output::convergence_csv(&history)?)?;
    let summary = output::summary(&config, &history, wall_time);
    output::write_json(&out_dir.join("summary.json"), &summary)?;

    let best = match summary.best_objective {
        Some(v) => v.to_string(),
        None => "none".to_string(),
    };
    println!("algo={} N_fe={} best={}", summary.algorithm, summary.n_fe, best);
    Ok(())
}
