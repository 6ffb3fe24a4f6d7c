//! Argument parsing and dispatch for the `archbo` binary.
//!
//! Exit statuses are a stable scripting contract: 0 success, 2 for usage
//! and configuration problems, 3 for IO failures.

use std::path::PathBuf;
use std::process::ExitCode;

use archbo::config::{Algorithm, RunOverrides};
use archbo::{compare, report, run};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "archbo",
    version,
    about = "Mixed-variable Bayesian optimization over hierarchical design spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimization; writes history.json, convergence.csv and
    /// summary.json into the output directory.
    Run {
        /// JSON run configuration; individual flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        problem: Option<String>,
        #[arg(long = "algo", value_enum)]
        algorithm: Option<Algorithm>,
        /// Total number of black-box evaluations, crashed ones included.
        #[arg(long)]
        budget: Option<usize>,
        /// Initial design size; defaults to a third of the budget, capped
        /// at 20. Ignored by nsga2.
        #[arg(long)]
        doe_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; falls back to the config file, then
        /// $ARCHBO_OUT, then the working directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Record real wall-clock timings in the history instead of zeros.
        /// Timed histories are not byte-reproducible across repeats.
        #[arg(long)]
        timings: bool,
    },
    /// Print combinatorial counts of a problem's design space as JSON.
    Enumerate {
        #[arg(long, default_value = "simple-turbofan")]
        problem: String,
    },
    /// Aggregate finished run directories into a comparison table.
    Compare {
        /// Directories previously written by `run`, one per run.
        run_dirs: Vec<PathBuf>,
        /// Directory for comparison.csv, comparison.txt and the chart.
        #[arg(long)]
        out: PathBuf,
        /// Also draw the best-so-far curves into convergence.svg.
        #[arg(long)]
        chart: bool,
    },
    /// Estimate a problem's optimum by per-assignment random sampling plus
    /// local polish; prints the result and writes oracle.json.
    Oracle {
        #[arg(long, default_value = "simple-turbofan")]
        problem: String,
        /// Random samples per discrete assignment.
        #[arg(long)]
        effort: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Evaluate with the hidden failure region enabled.
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        hidden: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, problem, algorithm, budget, doe_size, seed, out_dir, timings } => {
            let overrides = RunOverrides { problem, algorithm, budget, doe_size, seed, out_dir };
            run::cmd_run(config.as_deref(), &overrides, timings)
        }
        Command::Enumerate { problem } => report::cmd_enumerate(&problem),
        Command::Compare { run_dirs, out, chart } => compare::cmd_compare(&run_dirs, &out, chart),
        Command::Oracle { problem, effort, seed, hidden, out_dir } => {
            report::cmd_oracle(&problem, effort, seed, hidden, out_dir)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
