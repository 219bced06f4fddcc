//! Command-line driver for the private e-value toolkit.
//!
//! Subcommands:
//!
//! * `ci` — private confidence sets for a bounded mean across a grid of
//!   sample sizes and mechanisms, with a width-versus-n chart.
//! * `monitor` — anytime-valid risk monitoring over a loss stream (CSV or a
//!   synthetic change-point generator), with a log-e-value trajectory chart.
//! * `conformal` — private conformal prediction sets across an epsilon grid,
//!   with a set-size-versus-epsilon chart.
//! * `validate` — the full registered property-check suite plus the harness
//!   checks, written as a machine-readable pass/fail CSV.
//!
//! Every run writes `manifest.txt` (the resolved configuration) next to its
//! outputs; re-running with an identical manifest reproduces every CSV byte
//! for byte. Exit codes: 0 success, 1 validation failure, 2 usage or config
//! error, 3 mechanism undefined for the requested combination.

mod commands;
mod config;
mod csvio;
mod data;
mod plot;
mod streams;

use clap::{Parser, Subcommand};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "evdp",
    version,
    about = "Differentially private e-values: confidence sets, risk monitoring, conformal prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Private confidence sets for a bounded mean over a sample-size grid.
    Ci(commands::ci::CiArgs),
    /// Anytime-valid private risk monitoring over a loss stream.
    Monitor(commands::monitor::MonitorArgs),
    /// Private conformal prediction over an epsilon grid.
    Conformal(commands::conformal::ConformalArgs),
    /// Run every registered property check and write a pass/fail report.
    Validate(commands::validate::ValidateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match cli.command {
        Command::Ci(args) => commands::ci::run(&args),
        Command::Monitor(args) => commands::monitor::run(&args),
        Command::Conformal(args) => commands::conformal::run(&args),
        Command::Validate(args) => commands::validate::run(&args),
    };
    match run {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            classify(&err)
        }
    }
}

/// Maps an error chain to the documented exit codes: a mechanism that cannot
/// be calibrated for the requested combination is 3, everything else that
/// bubbles up as an error is a usage/config problem and exits 2.
fn classify(err: &anyhow::Error) -> ExitCode {
    let undefined = err.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<evdp_core::Error>(),
            Some(evdp_core::Error::LaplaceUndefined { .. })
        )
    });
    if undefined {
        ExitCode::from(3)
    } else {
        ExitCode::from(2)
    }
}
