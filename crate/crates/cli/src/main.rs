mod error;
mod manifest;
mod metrics;
mod report;
mod shape;
mod simulate;
mod svg;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rmlab::metrics::Binning;
use rmlab::simlab::Suite;
use rmlab::trajdata::UnscoredPolicy;

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "rmlab", version, about = "Reward-model evaluation and RL-dynamics lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// AUC, ECE, RM@k and pass@k for a scored trajectory dataset.
    Metrics(MetricsArgs),
    /// Hybrid rewards (and group advantages) for (status, score) rows.
    Shape(ShapeArgs),
    /// Run a simulated training experiment from a TOML config.
    Simulate(SimulateArgs),
    /// Run the theory-check suites.
    Verify(VerifyArgs),
    /// Merge metrics reports into one comparison table.
    Report(ReportArgs),
}

#[derive(clap::Args)]
pub struct MetricsArgs {
    /// Line-delimited JSON dataset.
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated k values; defaults to powers of two up to the run count.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// RM@k subsampling repetitions.
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Calibration bins.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, default_value = "equal-width")]
    pub binning: Binning,
    /// Allow instances with fewer than k runs (all their runs are used).
    #[arg(long)]
    pub ragged: bool,
    /// Verifier context window in tokens; longer records are unscored.
    #[arg(long)]
    pub context_limit: Option<u64>,
    /// Treatment of unscored records: exclude | zero.
    #[arg(long, default_value = "exclude")]
    pub unscored: UnscoredPolicy,
}

#[derive(clap::Args)]
pub struct ShapeArgs {
    /// CSV with `status` and `score` columns and an optional `group` column.
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args)]
pub struct SimulateArgs {
    /// Experiment config (TOML).
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `training.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `training.steps`.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(clap::Args)]
pub struct VerifyArgs {
    /// bias | variance | reversed-pair | tts | gradients | all
    #[arg(long, default_value = "all")]
    pub suite: Suite,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Monte-Carlo sample size.
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    /// Replace the calibrated scorer with one whose logit slope is FACTOR * d.
    #[arg(long, value_name = "FACTOR")]
    pub inject: Option<f64>,
    /// Also write verify.csv and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct ReportArgs {
    /// report.json files written by `rmlab metrics`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// k shown in the RM@k column; defaults to the largest k common to all reports.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Metrics(a) => metrics::run(&a),
        Command::Shape(a) => shape::run(&a),
        Command::Simulate(a) => simulate::run(&a),
        Command::Verify(a) => verify::run(&a),
        Command::Report(a) => report::run(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rmlab: {e}");
            ExitCode::from(e.code())
        }
    }
}
