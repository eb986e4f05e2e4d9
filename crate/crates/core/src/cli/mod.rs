//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invariant violation, 3 bad
//! configuration. Every failure prints one JSON object to stderr.

pub mod config;
pub mod output;
pub mod runner;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::error::Error;
use config::ConfigError;

pub const OUT_ENV: &str = "MIXED_LIOUVILLIAN_OUT";

#[derive(Debug, Parser)]
#[command(name = "mixed-liouvillian", version, about = "Open-system dynamics between the non-Hermitian and Lindblad limits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate one scenario and write its trajectory
    Run(CommonArgs),
    /// Repeat the spectral analysis over a list of return rates
    Sweep(CommonArgs),
    /// Write the pole census of one scenario
    Poles(CommonArgs),
    /// Compare the spectral propagator against an independent reference
    Oracle(CommonArgs),
    /// List the built-in parameter sets
    Presets,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Scenario file (JSON, schema_version 1)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in model; replaces the model of the config file
    #[arg(long)]
    pub preset: Option<String>,
    /// Return rate, or a comma-separated list
    #[arg(long = "gamma-c", allow_hyphen_values = true)]
    pub gamma_c: Option<String>,
    /// Basis label of the initial state
    #[arg(long)]
    pub rho0: Option<String>,
    /// Time grid as START:STOP:COUNT
    #[arg(long = "t")]
    pub times: Option<String>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: logical cores)
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Continuum levels per channel for the microscopic oracle
    #[arg(long)]
    pub k: Option<usize>,
    /// Continuum half bandwidth for the microscopic oracle
    #[arg(long)]
    pub w: Option<f64>,
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Invariant(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Invariant(_) => 2,
            CliError::Config(_) => 3,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Config(e) => json!({"error": "config", "pointer": e.pointer, "message": e.message}),
            CliError::Invariant(m) => json!({"error": "invariant_violation", "message": m}),
            CliError::Runtime(m) => json!({"error": "runtime", "message": m}),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Propagation { .. } | Error::InvalidState(_) | Error::NotPositive { .. } => {
                CliError::Invariant(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn report(err: &CliError) -> i32 {
    let _ = writeln!(std::io::stderr(), "{}", err.to_json());
    err.exit_code()
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            return report(&CliError::Config(ConfigError::new("", e.to_string().trim().to_string())));
        }
    };
    match runner::execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}
