//! Command-line front end for the `fibercoat` solver.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "fibercoat", version, about = "Thin-film-on-fiber simulations with the BEM and GM schemes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write snapshots, diagnostics and a summary.
    Run(RunArgs),
    /// Run two configurations and compare their final states.
    Compare(CompareArgs),
    /// Grid-refinement study of the spatial order.
    Convergence(ConvergenceArgs),
    /// Positivity and wall-clock benchmark of BEM against GM.
    Bench(BenchArgs),
    /// Fine-grid spin-up for scenarios that start from one (long-running).
    Spinup(SpinupArgs),
    /// List the built-in scenarios.
    List,
}

/// Selects a scenario and applies command-line overrides.
#[derive(Debug, Clone, Args, Default)]
pub struct Source {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in scenario name (see `fibercoat list`).
    #[arg(long)]
    pub scenario: Option<String>,
    /// Override the final time.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Override the scheme (`bem` or `gm`).
    #[arg(long)]
    pub scheme: Option<String>,
    /// Initial snapshot CSV on the scenario grid.
    #[arg(long)]
    pub initial: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: Source,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accepted steps between snapshots (0: first and last only).
    #[arg(long)]
    pub snapshot_every: Option<usize>,
    /// Simulated time between snapshots.
    #[arg(long)]
    pub snapshot_interval: Option<f64>,
    /// Accepted steps between diagnostics rows.
    #[arg(long)]
    pub diag_every: Option<usize>,
    /// Skip the entropy quadrature in the diagnostics log.
    #[arg(long)]
    pub no_entropy: bool,
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// First run: scenario name or TOML file.
    #[arg(long)]
    pub a: String,
    /// Second run: scenario name or TOML file.
    #[arg(long)]
    pub b: String,
    /// Scheme override for the first run.
    #[arg(long)]
    pub scheme_a: Option<String>,
    /// Scheme override for the second run.
    #[arg(long)]
    pub scheme_b: Option<String>,
    /// Time at which the states are compared.
    #[arg(long)]
    pub t_check: f64,
    /// Keep integrating both runs to this time to look for negative heights.
    #[arg(long)]
    pub run_past: Option<f64>,
    /// Write the report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub source: Source,
    /// Node counts, each twice the previous.
    #[arg(long, value_delimiter = ',', default_values_t = vec![64, 128, 256])]
    pub points: Vec<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub t_check: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub dt: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub newton_tolerance: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Grids to include (node counts out of 100, 200, 400). Pass the flag
    /// with no values for an empty table.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub grids: Option<Vec<usize>>,
    /// Latest time a GM row may run to while waiting for a negative height.
    #[arg(long, default_value_t = 5.0)]
    pub gm_limit: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct SpinupArgs {
    #[arg(long, default_value = "coarse_comparison")]
    pub scenario: String,
    /// Snapshot file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, short)]
    pub quiet: bool,
}
