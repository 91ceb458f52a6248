//! Command-line front end: configuration, experiment orchestration and
//! CSV/SVG output.

pub mod commands;
pub mod config;
pub mod error;
pub mod figures;
pub mod output;
pub mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::Report;
use crate::config::{RawConfig, RunConfig};
use crate::error::CliError;
use crate::figures::Figure;

#[derive(Debug, Parser)]
#[command(name = "blochsim", version, about = "Stochastic Bloch ensembles and rate-equation models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one model and write `<out>/<model>.csv`.
    Simulate(Common),
    /// Write the CSV bundle of one figure.
    Figure {
        /// fig1a | fig1b | fig2a | fig2b | fig3a | fig3b
        name: Figure,
        #[command(flatten)]
        common: Common,
    },
    /// Print derived quantities and regime flags.
    Analyze(Common),
    /// Test the field/inversion decorrelation hypothesis on the SDE ensemble.
    Decorrelate(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, env = "BLOCHSIM_THREADS")]
    pub threads: Option<usize>,
    /// Also write an SVG line plot.
    #[arg(long)]
    pub plot: bool,
}

impl Common {
    pub fn load(&self) -> Result<(RawConfig, RunConfig), CliError> {
        let mut raw = match &self.config {
            Some(p) => RawConfig::load(p)?,
            None => RawConfig::default(),
        };
        for s in &self.set {
            raw.set(s)?;
        }
        if let Some(seed) = self.seed {
            raw.set(&format!("seed={seed}"))?;
        }
        let cfg = RunConfig::from_raw(&raw)?;
        Ok((raw, cfg))
    }
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c) | Command::Analyze(c) | Command::Decorrelate(c) => c,
            Command::Figure { common, .. } => common,
        }
    }
}

/// Run a parsed command inside its own thread pool.
pub fn execute(cmd: &Command) -> Result<Report, CliError> {
    let common = cmd.common();
    let (raw, cfg) = common.load()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config("--threads", e.to_string()))?;
    let out = &common.out;
    pool.install(|| match cmd {
        Command::Simulate(c) => commands::simulate(&cfg, out, c.plot),
        Command::Analyze(_) => commands::analyze_cmd(&cfg, out),
        Command::Decorrelate(c) => commands::decorrelate(&cfg, out, c.plot),
        Command::Figure { name, common } => figures::figure(*name, &raw, &cfg, out, common.plot),
    })
}
