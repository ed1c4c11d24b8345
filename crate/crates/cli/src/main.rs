//! Command-line surface for the neural-network observable-estimation
//! pipeline: synthetic data generation, training, estimation, comparison
//! sweeps and count-table conversion.
//!
//! Every command reads one `key = value` config file, optionally patched
//! with `--set key=value` overrides, and all randomness derives from the
//! single `seed` key, so repeated runs are byte-identical.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 runtime error.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "nnqe", version, about = "Neural-network estimators for quantum observables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample synthetic measurements from an observable's exact ground state
    GenData(CommonArgs),
    /// Train an RBM wavefunction on a measurement dataset
    Train(CommonArgs),
    /// Estimate the observable with a trained checkpoint
    Estimate(CommonArgs),
    /// Sweep measurement budgets and compare both estimators
    Compare(CommonArgs),
    /// Expand a per-Pauli count table into a records dataset
    ConvertCounts(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the `key = value` config file
    #[arg(long)]
    config: PathBuf,
    /// Override a config key (repeatable), e.g. --set shots=1000
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// Error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    message: String,
    exit_code: i32,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            exit_code: 2,
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            exit_code: 3,
        }
    }

    /// Map a library error raised mid-computation to a runtime failure.
    pub fn from_run(error: nnqe::Error) -> Self {
        CliError::runtime(error.to_string())
    }
}

type CommandFn = fn(&RunConfig) -> Result<(), CliError>;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (args, run): (&CommonArgs, CommandFn) = match &cli.command {
        Command::GenData(args) => (args, commands::gen_data),
        Command::Train(args) => (args, commands::train),
        Command::Estimate(args) => (args, commands::estimate),
        Command::Compare(args) => (args, commands::compare),
        Command::ConvertCounts(args) => (args, commands::convert_counts),
    };
    let result = RunConfig::load(&args.config, &args.set).and_then(|cfg| run(&cfg));
    if let Err(error) = result {
        eprintln!("error: {}", error.message);
        std::process::exit(error.exit_code);
    }
}
