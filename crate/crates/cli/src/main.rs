//! Command-line front end: fit uncertainties, test score pairs against the
//! magic barrier, sample RMSE distributions, compare noise-handling
//! strategies and simulate synthetic raters.
//!
//! JSON goes to stdout, CSV to files, logs to stderr. Exit codes: 0 success,
//! 2 input or configuration error, 1 internal error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub const THREADS_ENV: &str = "UNCERTAIN_EVAL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "uncertain-eval", version, about = "Evaluate rating metrics under human uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate per-pair mu and sigma from repeated-trial ratings.
    Fit(commands::FitArgs),
    /// Test whether two metric scores are distinguishable under the barrier.
    Distinguish(commands::DistinguishArgs),
    /// Sample the RMSE distribution by Monte Carlo.
    RmseDist(commands::RmseDistArgs),
    /// Run noise-handling strategies and test their score changes.
    Strategies(commands::StrategiesArgs),
    /// Generate a synthetic population and its repeated ratings.
    Simulate(commands::SimulateArgs),
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Internal(String),
}

impl From<uncertain_eval::Error> for CliError {
    fn from(e: uncertain_eval::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

fn configure_threads() -> Result<(), CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Input(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`")))?,
        _ => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Distinguish(a) => commands::distinguish(a),
        Command::RmseDist(a) => commands::rmse_dist(a),
        Command::Strategies(a) => commands::strategies(a),
        Command::Simulate(a) => commands::simulate(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(1)
        }
    }
}

pub(crate) fn manifest_path_for(output: &std::path::Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}
