//! `ptcure` command-line front end: fit real data, simulate datasets, run
//! replication studies, and recompute diagnostics from exported chains.
//!
//! Exit codes: 0 success, 1 configuration/validation failure, 2 numerical
//! failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ptcure",
    version,
    about = "Promotion time cure model on current status data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model to a dataset and write summaries, chains, and checks
    Fit(RunArgs),
    /// Generate one current status dataset with a cured fraction
    Simulate(RunArgs),
    /// Run a replication study and report operating characteristics
    Study(RunArgs),
    /// Recompute convergence diagnostics from exported chain files
    Diagnose(RunArgs),
}

#[derive(Args)]
pub struct RunArgs {
    /// TOML run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Override the number of chains
    #[arg(long)]
    pub chains: Option<usize>,
    /// Override the random seed
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 1,
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 2,
        }
    }
}

impl From<ptcure::Error> for CliError {
    fn from(e: ptcure::Error) -> Self {
        use ptcure::Error::*;
        let code = match &e {
            Io { .. } | Parse { .. } | Invalid(_) | Dimension { .. } | SingleChain => 1,
            NotPositiveDefinite
            | MapDidNotConverge { .. }
            | NonFiniteHessian { .. }
            | NonFiniteDeviance { .. }
            | EmptyChain => 2,
        };
        CliError {
            message: e.to_string(),
            code,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            message: e.to_string(),
            code: 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => commands::fit(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Study(args) => commands::study(&args),
        Command::Diagnose(args) => commands::diagnose(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
