mod bound;
mod experiment;
mod failure;
mod spec;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::failure::Failure;

/// Exact simulation of thermodynamic uncertainty relations for quantum channels.
#[derive(Debug, Parser)]
#[command(name = "turlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run invariant suites over random channels from the experiment family.
    Verify {
        /// Suite to run (repeatable); all suites when omitted.
        #[arg(long = "suite", value_name = "NAME")]
        suites: Vec<String>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report as JSON.
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
        /// Flip the sign of dV0/dθ (sensitivity check for the suites).
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Run the randomized experiment and write trials.csv, trials.json,
    /// summary.json and manifest.json.
    Experiment(experiment::ExperimentArgs),
    /// Evaluate the correlator bound and TURs for one instance given as JSON.
    Bound {
        /// JSON file with `channel`, `rho`, `a` and `b`.
        #[arg(long, value_name = "PATH")]
        spec: PathBuf,
        /// `linear` (default) or `quadratic` weight of the nested term in the
        /// truncated baseline.
        #[arg(long, default_value = "linear")]
        reading: String,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Verify {
            suites,
            trials,
            seed,
            json,
            inject_fault,
        } => verify::run(&suites, trials, seed, json.as_deref(), inject_fault),
        Command::Experiment(args) => experiment::run(&args),
        Command::Bound { spec, reading } => bound::run(&spec, &reading),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
