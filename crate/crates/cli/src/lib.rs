//! Command-line front end: config parsing, command dispatch and report
//! emission.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::Overrides;
pub use error::{CliError, CliResult, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION};

#[derive(Debug, Parser)]
#[command(name = "smolkram", version, about = "Small-mass limit simulation and convergence studies")]
pub struct Cli {
    /// Override the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the config output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for replica fan-out (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a Lyapunov ({"gamma","Q"}) or Sylvester ({"A","B","C"}) problem.
    Solve {
        problem: PathBuf,
        /// Cross-check against the integral representation.
        #[arg(long)]
        oracle: bool,
        /// Quadrature tolerance for --oracle.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Probe the model assumptions and print the report.
    Validate { config: PathBuf },
    /// Single-ε coupled run; writes paths.csv.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Convergence study; writes report.json and report.csv.
    Converge { config: PathBuf },
    /// Compare the limit stepper with a naive overdamped stepper.
    ReduceCheck { config: PathBuf },
}

/// Runs a parsed command and returns the stdout payload.
pub fn dispatch(cli: &Cli) -> CliResult<String> {
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
    };
    let load = |path: &PathBuf| commands::load_config(path, &overrides);
    match &cli.command {
        Command::Solve { problem, oracle, tol } => commands::solve(problem, *oracle, *tol),
        Command::Validate { config } => commands::validate(&load(config)?),
        Command::Simulate { config, epsilon } => commands::simulate(&load(config)?, *epsilon),
        Command::Converge { config } => commands::converge(&load(config)?),
        Command::ReduceCheck { config } => commands::reduce_check(&load(config)?),
    }
}
