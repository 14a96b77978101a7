//! `ddro`: solves, radius sweeps, CVaR tables and the verification suite.
//!
//! Exit codes: 0 success, 1 input error, 2 solver did not converge,
//! 3 verification failure.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ddro_core::DdroError;
use thiserror::Error;

use config::{Overrides, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    NotConverged(String),
    #[error("{0}")]
    Verification(String),
}

impl From<DdroError> for CliError {
    fn from(e: DdroError) -> Self {
        match e {
            DdroError::NotConverged { .. } => Self::NotConverged(e.to_string()),
            other => Self::Input(other.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Input(_) => 1,
            Self::NotConverged(_) => 2,
            Self::Verification(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ddro", version, about = "Distributionally robust decisions over density-ratio and L2 balls")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem and write report.json and history.csv.
    Solve(Overrides),
    /// L2-ball sweep over radii; writes pareto.csv.
    Pareto(Overrides),
    /// Baseline plus one density-ratio design per level; writes table.csv.
    CvarTable(Overrides),
    /// Run the seeded verification suites; writes verify.log and verify.csv.
    Verify(Overrides),
}

fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("DDRO_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("DDRO_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Input(format!("cannot start thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Solve(flags) => commands::solve(&RunConfig::resolve(&flags)?),
        Command::Pareto(flags) => commands::pareto(&RunConfig::resolve(&flags)?),
        Command::CvarTable(flags) => commands::cvar_table_cmd(&RunConfig::resolve(&flags)?),
        Command::Verify(flags) => commands::verify(&RunConfig::resolve(&flags)?, flags.corrupt_gradient),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            eprintln!("error: {}", text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
