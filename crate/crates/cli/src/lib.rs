//! `omresp`: command-line runs of the optomech response models.
//!
//! Every computing subcommand resolves flags, an optional TOML file and an
//! optional preset into one [`config::RunConfig`], writes a CSV table and,
//! when writing to a file, a JSON sidecar with everything needed to re-run.
//!
//! Exit codes: 0 success, 2 bad configuration, 3 numerical failure, 1 I/O.

pub mod commands;
pub mod config;

use std::io::Write;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{Mode, RunArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] optomech::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "omresp",
    version,
    about = "Phase-sensitive optomechanical response"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Probe response against two-photon detuning.
    Spectrum(RunArgs),
    /// Probe transmission against the coupling |G| at fixed detuning.
    SweepG(RunArgs),
    /// Master-equation steady states compared with the analytic response.
    Lindblad(RunArgs),
    /// Full nonlinear dynamics against the linear prediction.
    NonlinearCheck(RunArgs),
    /// Regime, special couplings and linearity margin as JSON.
    Classify(RunArgs),
    /// Print the preset catalog.
    ListPresets {
        #[arg(long)]
        json: bool,
    },
}

/// Runs one parsed command line; tables go to `stdout` unless an output
/// path is set.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (mode, args) = match cli.command {
        Command::ListPresets { json } => return commands::list_presets(json, stdout),
        Command::Spectrum(a) => (Mode::Spectrum, a),
        Command::SweepG(a) => (Mode::SweepG, a),
        Command::Lindblad(a) => (Mode::Lindblad, a),
        Command::NonlinearCheck(a) => (Mode::NonlinearCheck, a),
        Command::Classify(a) => (Mode::Classify, a),
    };
    let cfg = config::resolve(mode, args)?;
    log::info!("resolved {} run: {:?}", mode.name(), cfg);
    commands::execute(&cfg, stdout)
}
