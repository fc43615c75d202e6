//! `lhv` command-line tool.
//!
//! Exit status: 0 on success, 1 when a verification fails, 2 for usage
//! errors and unreadable or invalid input.

mod bounds;
mod output;
mod scan;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "lhv", version, about = "Local hidden variable models for inefficient detectors")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Report format (default: csv for tables and scans, json otherwise).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// RNG seed for sampling; drawn from the OS and echoed when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Threshold tables.
    Bounds(bounds::BoundsArgs),
    /// Two-party guessing model.
    #[command(subcommand)]
    TwoParty(TwoPartyCommand),
    /// N-party protocol family.
    #[command(subcommand)]
    Multiparty(MultipartyCommand),
    /// Dimension-only model for maximally entangled states.
    #[command(subcommand)]
    DimModel(DimModelCommand),
}

#[derive(Subcommand, Debug)]
enum TwoPartyCommand {
    /// Compare the model with the quantum statistics at its threshold.
    Verify(verify::ModelVerifyArgs),
}

#[derive(Subcommand, Debug)]
enum MultipartyCommand {
    /// Exact protocol weights for one (N, M).
    Solve(scan::SolveArgs),
    /// Positivity of the weights over a range of N.
    Scan(scan::ScanArgs),
    /// Compare the model with the quantum statistics at its threshold.
    Verify(verify::ModelVerifyArgs),
}

#[derive(Subcommand, Debug)]
enum DimModelCommand {
    /// Monte Carlo check of firing rate, marginals and the error bound.
    Verify(verify::DimVerifyArgs),
}

/// How a command ended.
pub enum Status {
    Done,
    VerificationFailed,
}

#[derive(Debug)]
pub struct CliError(pub String);

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bounds(args) => bounds::run(&cli.common, &args),
        Command::TwoParty(TwoPartyCommand::Verify(args)) => {
            verify::run_model(&cli.common, &args, verify::ModelKind::TwoParty)
        }
        Command::Multiparty(MultipartyCommand::Solve(args)) => scan::solve(&cli.common, &args),
        Command::Multiparty(MultipartyCommand::Scan(args)) => scan::scan(&cli.common, &args),
        Command::Multiparty(MultipartyCommand::Verify(args)) => {
            verify::run_model(&cli.common, &args, verify::ModelKind::Multiparty)
        }
        Command::DimModel(DimModelCommand::Verify(args)) => verify::run_dimension(&cli.common, &args),
    };
    match result {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::VerificationFailed) => ExitCode::from(1),
        Err(CliError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
