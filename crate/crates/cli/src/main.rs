//! `snse` - experiment harness around the spectral stochastic
//! Navier-Stokes simulator: assumption validation, ensemble simulation,
//! path analysis and report emission.
//!
//! Exit codes: 0 ok, 2 assumption failure, 3 integration failure,
//! 4 ingestion error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod persist;
mod report;

/// Errors carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    Assumption(String),
    Integration(String),
    Ingestion(String),
    Other(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Assumption(_) => 2,
            CliError::Integration(_) => 3,
            CliError::Ingestion(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    pub fn from_core(e: snse_core::Error) -> Self {
        match e {
            snse_core::Error::AssumptionViolation { .. } => CliError::Assumption(e.to_string()),
            snse_core::Error::IntegrationFailure { .. } => CliError::Integration(e.to_string()),
            snse_core::Error::InvalidParameter(_) | snse_core::Error::GridUnderResolved { .. } => {
                CliError::Ingestion(e.to_string())
            }
            other => CliError::Other(other.to_string()),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Assumption(m) => write!(f, "assumption failure: {m}"),
            CliError::Integration(m) => write!(f, "integration failure: {m}"),
            CliError::Ingestion(m) => write!(f, "ingestion error: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "snse",
    about = "Pseudo-spectral Galerkin simulator for stochastic incompressible flow with jump and Wiener noise"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the configured noise coefficients and basis against the
    /// model assumptions.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate one ensemble per configured Galerkin level and persist
    /// the paths.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: config, then $SNSE_OUT, then ./snse-out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = library default).
        #[arg(long)]
        workers: Option<usize>,
        /// Simulate only this level.
        #[arg(long)]
        level: Option<usize>,
        /// Also export the paths of each ensemble as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Compute moment, tightness and Aldous statistics from persisted
    /// ensembles.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// Directory holding the ensemble files.
        #[arg(long)]
        ensembles: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a run report as text plus a CSV bundle.
    Report {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Validate { config } => commands::cmd_validate(&config),
        Cmd::Simulate { config, out, seed, workers, level, csv } => {
            commands::cmd_simulate(&config, out, seed, workers, level, csv)
        }
        Cmd::Analyze { config, ensembles, out } => commands::cmd_analyze(&config, &ensembles, out),
        Cmd::Report { report, out } => commands::cmd_report(&report, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
