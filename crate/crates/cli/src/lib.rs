//! Command-line front end: JSON configs in, reproducible CSV and JSON out.
//!
//! Exit codes: 0 success, 1 verification ran and a criterion failed,
//! 2 invalid configuration or arguments, 3 runtime failure.

pub mod commands;
pub mod config;
pub mod output;

use std::fmt;

use clap::{Parser, Subcommand};

use commands::{simulate, sweep, urn, verify};

#[derive(Debug, Parser)]
#[command(name = "nll", version, about = "Sequential observational learning experiments")]
pub struct Cli {
    /// Master seed for every derived stream.
    #[arg(long, global = true, env = "NLL_SEED", default_value_t = 42)]
    pub seed: u64,

    /// Worker threads (default: machine parallelism). Outputs do not depend on it.
    #[arg(long, global = true, env = "NLL_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run Monte Carlo trials of the agent process described by a config.
    Simulate(simulate::SimulateArgs),
    /// Tabulate an urn function and report its drift and fixed points.
    Urn(urn::UrnArgs),
    /// Run the acceptance suites.
    Verify(verify::VerifyArgs),
    /// Run one simulation per cell of a parameter grid.
    Sweep(sweep::SweepArgs),
}

#[derive(Debug)]
pub enum CliError {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
    /// Verification completed and at least one criterion failed.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "invalid configuration: {e:#}"),
            CliError::Runtime(e) => write!(f, "runtime failure: {e:#}"),
            CliError::Failed(msg) => write!(f, "verification failed: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Tags a fallible result with the exit class of its error.
pub trait Classify<T> {
    fn or_config(self) -> Result<T, CliError>;
    fn or_runtime(self) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_config(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Config(e.into()))
    }

    fn or_runtime(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Runtime(e.into()))
    }
}

pub(crate) fn config_error(msg: impl fmt::Display) -> CliError {
    CliError::Config(anyhow::anyhow!("{msg}"))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads == Some(0) {
        return Err(config_error("--threads must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .or_runtime()?;
    let seed = cli.seed;
    pool.install(|| match &cli.command {
        Command::Simulate(args) => simulate::run(args, seed),
        Command::Urn(args) => urn::run(args, seed),
        Command::Verify(args) => verify::run(args, seed),
        Command::Sweep(args) => sweep::run(args, seed),
    })
}
