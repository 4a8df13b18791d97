use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};

pub const LONG_VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\narchive format 1.0\nconfig schema 1");

/// Pilot-wave simulations: calibration, single runs, seeded ensembles,
/// analytic Born densities and their comparison.
#[derive(Debug, Parser)]
#[command(name = "pilotwave", version, long_version = LONG_VERSION)]
pub struct Cli {
    /// Configuration file (flat TOML); defaults to the built-in reproduction
    /// configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override one configuration key, e.g. `--set alpha=0.05`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_assignment)]
    pub overrides: Vec<(String, String)>,

    /// Rebuild the domain and step count for this horizon (in time units),
    /// keeping the resolution.
    #[arg(long, global = true, value_name = "T")]
    pub horizon: Option<f64>,

    /// Directory under which run directories are created.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure the stagnant field amplitude and the forcing that normalizes it.
    Calibrate,
    /// One seeded coupled simulation with trajectory, field heatmap and snapshots.
    Run(RunArgs),
    /// Seeded ensemble of independent runs, written as an archive.
    Ensemble(EnsembleArgs),
    /// Born density of the free Gaussian response.
    Analytic(AnalyticArgs),
    /// Empirical ensemble density against the Born density.
    Compare(CompareArgs),
    /// Columnar text and heatmaps from an ensemble archive.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Perturbation seed; defaults to the configuration's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of evenly spaced field snapshots to write (0 for none).
    #[arg(long, default_value_t = 0)]
    pub snapshots: usize,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// Number of runs.
    #[arg(long, default_value_t = 200)]
    pub runs: usize,
    /// Seed of the first run; run i uses seed-base + i.
    #[arg(long, default_value_t = 1)]
    pub seed_base: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "PILOTWAVE_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    /// Last time included.
    #[arg(long, value_name = "T")]
    pub t_max: Option<f64>,
    /// Half-width of the density window around x0.
    #[arg(long, value_name = "L")]
    pub x_half_width: Option<f64>,
    /// Spacing of the density grid.
    #[arg(long, value_name = "DX", default_value_t = 0.1)]
    pub x_step: f64,
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    /// Gaussian width of the initial disturbance.
    #[arg(long, default_value_t = 2.0)]
    pub a: f64,
    /// Number of Fourier modes.
    #[arg(long, default_value_t = 4096)]
    pub modes: usize,
    #[command(flatten)]
    pub window: WindowArgs,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("reference").required(true).args(["analytic_auto", "a"])))]
pub struct CompareArgs {
    /// Ensemble archive directory.
    #[arg(long, value_name = "DIR")]
    pub ensemble: PathBuf,
    /// Fit the analytic width to the initial empirical density.
    #[arg(long)]
    pub analytic_auto: bool,
    /// Explicit analytic Gaussian width.
    #[arg(long)]
    pub a: Option<f64>,
    /// Kernel bandwidth; defaults to one Compton wavelength.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[command(flatten)]
    pub window: WindowArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Ensemble archive directory.
    #[arg(long, value_name = "DIR")]
    pub ensemble: PathBuf,
    /// Kernel bandwidth; defaults to one Compton wavelength.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[command(flatten)]
    pub window: WindowArgs,
}

fn parse_assignment(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(format!("expected KEY=VALUE, got `{s}`")),
    }
}
