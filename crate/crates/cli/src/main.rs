//! `netsample`: generate networks, simulate them, plan sampling sets, sample,
//! recover and run RMSE sweeps.
//!
//! Exit codes: 0 success, 2 usage or I/O, 3 model or stability, 4 data
//! inconsistency, 5 numerical failure.

mod commands;
mod manifest;
mod presets;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "netsample",
    version,
    about = "Joint time- and graph-domain sampling of network dynamics"
)]
struct Cli {
    /// Log filter when RUST_LOG is unset (error, warn, info, debug).
    #[arg(long, global = true, default_value = "warn")]
    log: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random directed network.
    Gen(commands::GenArgs),
    /// Integrate a model on a network from an initial deviation.
    Simulate(commands::SimulateArgs),
    /// Choose sampling nodes, the recovery operator and the sampling rate.
    Plan(commands::PlanArgs),
    /// Record the plan's nodes at a uniform rate.
    Sample(commands::SampleArgs),
    /// Rebuild every node's trajectory from a sample record.
    Recover(commands::RecoverArgs),
    /// Run an RMSE sweep over sampling rates and sample-set sizes.
    Sweep(commands::SweepArgs),
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const USAGE: u8 = 2;
    pub const MODEL: u8 = 3;
    pub const DATA: u8 = 4;
    pub const NUMERIC: u8 = 5;

    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: Failure::USAGE,
            message: message.into(),
        }
    }
}

impl From<netsample::Error> for Failure {
    fn from(e: netsample::Error) -> Self {
        use netsample::Error as E;
        let code = match &e {
            E::Parameter(_) | E::Io { .. } => Failure::USAGE,
            E::Unstable { .. } | E::NonConvergence(_) | E::Divergence { .. } => Failure::MODEL,
            E::Format { .. } | E::Dimension { .. } | E::Grid(_) => Failure::DATA,
            E::NonDiagonalizable { .. }
            | E::Eigen(_)
            | E::Degenerate(_)
            | E::Symmetry { .. }
            | E::InfeasibleBand(_)
            | E::DivergentTransform { .. }
            | E::Domain(_) => Failure::NUMERIC,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&cli.log)).init();
    let result = match cli.command {
        Command::Gen(args) => commands::gen(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Plan(args) => commands::plan(args),
        Command::Sample(args) => commands::sample(args),
        Command::Recover(args) => commands::recover(args),
        Command::Sweep(args) => commands::sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
