use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// NLOS-robust range positioning: simulate scenarios, replay range logs and
/// compute error reports.
#[derive(Debug, Parser)]
#[command(name = "nloskit", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario (optionally many seeded repetitions) and run the estimators.
    Simulate(SimulateArgs),
    /// Run the estimators over a recorded measurement log.
    Replay(ReplayArgs),
    /// Recompute error reports from previously written fix files.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON file, or the name of a bundled scenario (case1..case4).
    #[arg(long)]
    pub scenario: String,

    /// Number of Monte-Carlo repetitions; repetition j uses seed + j.
    #[arg(long, default_value_t = 1)]
    pub reps: usize,

    /// Base seed; defaults to the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Measurement log CSV (k,t,r_1..r_N[,truth_x,truth_y]).
    #[arg(long)]
    pub log: PathBuf,

    /// Scenario supplying anchor positions and estimator settings.
    #[arg(long)]
    pub scenario: String,

    /// Ground-truth CSV; defaults to the truth columns of the log, if any.
    #[arg(long)]
    pub truth: Option<PathBuf>,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Output directory of an earlier simulate or replay run.
    #[arg(long, conflicts_with = "fixes", required_unless_present = "fixes")]
    pub input: Option<PathBuf>,

    /// Fix CSV files to evaluate against --truth.
    #[arg(long, num_args = 1.., requires = "truth")]
    pub fixes: Vec<PathBuf>,

    /// Ground-truth CSV for --fixes (a truth file or a measurement log).
    #[arg(long)]
    pub truth: Option<PathBuf>,

    /// Restrict the report to these estimators.
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<String>>,

    /// Error metric: euclidean, x or y.
    #[arg(long)]
    pub metric: Option<String>,

    /// Excluded epochs: ranges like 0..40,300.. or lap1 or none.
    #[arg(long)]
    pub exclude: Option<String>,

    /// Output directory (NLOSKIT_OUT takes precedence).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Estimators to run, comma-separated (LS, RKF, WLS-RKF).
    #[arg(long, value_delimiter = ',', default_value = "LS,RKF,WLS-RKF")]
    pub estimators: Vec<String>,

    /// Output directory (NLOSKIT_OUT takes precedence).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Error metric: euclidean, x or y.
    #[arg(long)]
    pub metric: Option<String>,

    /// Excluded epochs: ranges like 0..40,300.. or lap1 or none.
    #[arg(long)]
    pub exclude: Option<String>,

    /// Override the χ² gating threshold.
    #[arg(long)]
    pub chi2: Option<f64>,

    /// Write a trajectory SVG (default).
    #[arg(long, overrides_with = "no_svg")]
    pub svg: bool,

    /// Skip the trajectory SVG.
    #[arg(long, overrides_with = "svg")]
    pub no_svg: bool,
}
