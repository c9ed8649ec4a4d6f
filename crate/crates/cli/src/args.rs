use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "ktram",
    version,
    about = "kT-RAM emulator: device sweeps, benchmarks, core state files"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for every random stream [default: $KTRAM_SEED, else 42]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Device update mode: meanfield or stochastic
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Device preset: W, Sn or Cr
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// key = value file with defaults; command-line flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-device pulse experiments
    #[command(subcommand)]
    Device(DeviceCommand),
    /// Learning benchmarks on IDX or CSV data
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Core state files
    #[command(subcommand)]
    Core(CoreCommand),
}

#[derive(Debug, Subcommand)]
pub enum DeviceCommand {
    /// Apply a pulse train and write the per-pulse trace as CSV
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Trace output path (stdout when omitted)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// CSV of `volts,seconds` rows replacing the default train
    #[arg(long, value_name = "FILE")]
    pub pulses: Option<PathBuf>,
    /// Initial ON fraction
    #[arg(long)]
    pub start: Option<f64>,
}

/// Core and learner settings shared by the bench commands.
#[derive(Debug, Args, Default, Clone)]
pub struct TuneArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Encoder threshold in [0, 1]
    #[arg(long)]
    pub theta: Option<f64>,
    /// Drop the bias synapse and bias spike
    #[arg(long)]
    pub no_bias: bool,
    #[arg(long, value_name = "VOLTS")]
    pub v_read: Option<f64>,
    #[arg(long, value_name = "VOLTS")]
    pub v_write: Option<f64>,
    #[arg(long, value_name = "SECONDS")]
    pub t_pulse: Option<f64>,
    #[arg(long)]
    pub renorm_interval: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Train the one-node-per-label classifier and report metrics
    Classify(ClassifyArgs),
    /// Fit the anomaly detector on one CSV and score another
    Anomaly(AnomalyArgs),
    /// Fit a cluster ensemble and emit per-sample signatures
    Cluster(ClusterArgs),
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Training data: CSV, or IDX images when --idx-labels is given
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// IDX label file paired with --data
    #[arg(long, value_name = "PATH")]
    pub idx_labels: Option<PathBuf>,
    /// Evaluation data (defaults to the training data)
    #[arg(long, value_name = "PATH")]
    pub test_data: Option<PathBuf>,
    /// IDX label file paired with --test-data
    #[arg(long, value_name = "PATH")]
    pub test_idx_labels: Option<PathBuf>,
    /// CSV files have a header row
    #[arg(long)]
    pub header: bool,
    /// Metrics report path (also printed)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Update every node on every sample instead of only on errors
    #[arg(long)]
    pub always_update: bool,
    /// Activation margin for skipping writes
    #[arg(long)]
    pub margin: Option<f64>,
    /// Per-epoch pulse-width multiplier in (0, 1]
    #[arg(long)]
    pub anneal: Option<f64>,
    #[command(flatten)]
    pub tune: TuneArgs,
}

#[derive(Debug, Args)]
pub struct AnomalyArgs {
    /// Training CSV (labels ignored)
    #[arg(long, value_name = "PATH")]
    pub train: PathBuf,
    /// CSV to score; labels, if any, are copied to the output
    #[arg(long, value_name = "PATH")]
    pub test: PathBuf,
    #[arg(long)]
    pub header: bool,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub tune: TuneArgs,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    #[arg(long)]
    pub header: bool,
    /// Number of ensemble nodes
    #[arg(long)]
    pub ensemble: Option<usize>,
    /// Inputs per node (default: half the features, at least 1)
    #[arg(long)]
    pub subset: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub tune: TuneArgs,
}

#[derive(Debug, Subcommand)]
pub enum CoreCommand {
    /// Build a core, run seeded FU operations on it and save its state
    Save(CoreSaveArgs),
    /// Load and verify a state file, optionally continue and re-save it
    Load(CoreLoadArgs),
}

#[derive(Debug, Args)]
pub struct CoreSaveArgs {
    #[arg(long, value_name = "FILE")]
    pub state: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub rows: u32,
    #[arg(long, default_value_t = 16)]
    pub cols: u32,
    /// FU operations applied before saving
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    #[command(flatten)]
    pub tune: TuneArgs,
}

#[derive(Debug, Args)]
pub struct CoreLoadArgs {
    #[arg(long, value_name = "FILE")]
    pub state: PathBuf,
    /// FU operations applied after loading
    #[arg(long, default_value_t = 0)]
    pub steps: usize,
    /// Write the (possibly advanced) state here
    #[arg(long, value_name = "FILE")]
    pub resave: Option<PathBuf>,
}
