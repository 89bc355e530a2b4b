//! `ddgm`: synthesize, simulate, reconstruct and sweep limited-angle
//! tomography problems.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime failure,
//! 4 denoiser connectivity or protocol failure.

// `!(x > 0.0)` is used deliberately so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod dataset;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Config;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError { code: 3, message: message.into() }
    }

    pub fn connectivity(message: impl Into<String>) -> Self {
        CliError { code: 4, message: message.into() }
    }
}

impl From<ddgm_core::Error> for CliError {
    fn from(e: ddgm_core::Error) -> Self {
        use ddgm_core::Error as E;
        match e {
            E::Parameter(_) | E::Capability(_) => CliError::config(e.to_string()),
            E::Connectivity(_) | E::Protocol(_) => CliError::connectivity(e.to_string()),
            _ => CliError::runtime(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "ddgm", version, about = "Limited-angle tomography with diffusion denoising priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration, or a previous run's manifest.json to replay it.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable), e.g. `--set grad_steps=10`.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Input dataset directory (same as `--set input=...`).
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Output directory (same as `--set output=...`).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl Common {
    fn load(&self, base: Config) -> Result<Config, CliError> {
        let mut overrides = self.set.clone();
        if let Some(p) = &self.input {
            overrides.push(format!("input={}", toml_string(p)));
        }
        if let Some(p) = &self.output {
            overrides.push(format!("output={}", toml_string(p)));
        }
        Config::load(base, self.config.as_deref(), &overrides)
    }
}

fn toml_string(p: &std::path::Path) -> String {
    toml::Value::String(p.display().to_string()).to_string()
}

#[derive(Subcommand)]
enum Command {
    /// Draw ground-truth images from the configured prior.
    Synthesize(Common),
    /// Project a dataset's images and add measurement noise.
    Simulate(Common),
    /// Reconstruct every sinogram in a dataset with the configured method.
    Reconstruct(Common),
    /// Draw unconditional samples with the denoiser.
    Generate(Common),
    /// Evaluate the Cartesian product of the `grid` table; resumable.
    Sweep(Common),
    /// Wide-image reconstruction with patch-blended denoising and a seam check.
    BlendDemo(Common),
    /// Print sweep CSVs or run manifests as markdown tables.
    Report {
        /// `sweep.csv` files, `manifest.json` files, or run directories.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synthesize(c) => commands::synthesize(&c.load(Config::default())?),
        Command::Simulate(c) => commands::simulate(&c.load(Config::default())?),
        Command::Reconstruct(c) => commands::reconstruct(&c.load(Config::default())?),
        Command::Generate(c) => commands::generate(&c.load(Config::default())?),
        Command::Sweep(c) => commands::sweep(&c.load(Config::default())?),
        Command::BlendDemo(c) => commands::blend_demo(&c.load(Config::blend_demo_defaults())?),
        Command::Report { paths } => commands::report(&paths),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
