//! Command-line front end: TOML experiment files in, CSV/JSON data out.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::LoadedConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "tribody", version, about = "Three-body Casimir optomechanics simulations")]
pub struct Cli {
    /// Experiment description (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps (all cores when absent).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Casimir force and gradient on the center cantilever along a gap sweep.
    ForceCurve,
    /// Eigenvalues of the three-mode Hamiltonian versus δ₃.
    EigenSweep,
    /// Thermal PSD maps over a parameter sweep.
    Spectrogram,
    /// Driven transfer ratio A₃/A₁ over a parameter sweep.
    Transduction,
    /// Separation calibration from frequency-shift records.
    Calibrate,
    /// Sphere–plate force table for the configured material.
    MaterialTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Outputs were written but every run was unstable.
    InstabilityOnly,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::InstabilityOnly => 4,
        }
    }
}

pub fn execute(command: Command, loaded: &LoadedConfig) -> CliResult<commands::CommandOutput> {
    match command {
        Command::ForceCurve => commands::force_curve(loaded),
        Command::EigenSweep => commands::eigen_sweep(loaded),
        Command::Spectrogram => commands::spectrogram(loaded),
        Command::Transduction => commands::transduction(loaded),
        Command::Calibrate => commands::calibrate(loaded),
        Command::MaterialTable => commands::material_table(loaded),
    }
}

pub fn run(cli: &Cli) -> CliResult<Status> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::config("--config", "a config file is required"))?;
    let out_dir = cli
        .out
        .as_ref()
        .ok_or_else(|| CliError::config("--out", "an output directory is required"))?;
    if cli.threads == Some(0) {
        return Err(CliError::config("--threads", "must be at least 1"));
    }
    let loaded = LoadedConfig::load(path)?.with_seed(cli.seed);
    let result = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::config("--threads", e.to_string()))?
            .install(|| execute(cli.command, &loaded)),
        None => execute(cli.command, &loaded),
    }?;
    output::write(out_dir, &loaded, &result)?;
    Ok(if result.instability_only {
        Status::InstabilityOnly
    } else {
        Status::Success
    })
}
