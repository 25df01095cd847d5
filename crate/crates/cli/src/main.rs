//! `sf` — command-line surface over the estimator library: generate
//! instances, run single estimates, benchmark risks, sweep parameter grids,
//! verify the analytic bounds and render sweep CSVs as SVG plots.
//!
//! Exit status: 0 on success, 1 on validation errors (bad flags, malformed
//! configs, missing files), 2 on internal failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod svg;

#[derive(Parser)]
#[command(
    name = "sf",
    version,
    about = "Column-sparse linear functional and robust mean estimation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Generate one instance and write its matrices
    Gen(CommonArgs),
    /// Apply a single estimator to a matrix file
    Estimate(CommonArgs),
    /// Monte Carlo risk for every estimator in a config
    Bench(CommonArgs),
    /// Risk sweep along a parameter axis
    Sweep(CommonArgs),
    /// Run the analytic-bound verification suite
    Verify(CommonArgs),
    /// Render a sweep CSV as a log-log SVG plot
    Plot(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON config file (schema in docs/formats.md)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Table output format
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    /// Worker threads (falls back to SF_THREADS, then all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Write wall_ms as 0 so repeated runs are byte-identical
    #[arg(long)]
    stable_timing: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// Errors split by exit status.
#[derive(Debug)]
enum CliError {
    Validation(String),
    Internal(String),
}

impl CliError {
    fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    fn internal(msg: impl Into<String>) -> Self {
        CliError::Internal(msg.into())
    }
}

impl From<sf_core::CoreError> for CliError {
    fn from(err: sf_core::CoreError) -> Self {
        CliError::Validation(err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}
