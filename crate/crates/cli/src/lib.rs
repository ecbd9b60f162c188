//! Command-line front end: scoring runs, evaluation runs, synthetic corpora
//! and metric reports. `main.rs` only parses arguments and maps
//! [`CliError`] to an exit code, so everything here is callable from tests.

pub mod commands;
pub mod config;
mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "uqtrace", version, about = "Uncertainty scores and their evaluation over recorded generation traces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score eval-split traces with the selected estimators.
    Score(ScoreArgs),
    /// Compute metrics, redundancy and family ROC data for one or more panels.
    Eval(EvalArgs),
    /// Write a seeded synthetic corpus (eval, train and background files).
    Synth(SynthArgs),
    /// Print a metrics table from an evaluation run.
    Report(ReportArgs),
}

/// Options shared by every command that reads a run configuration.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML file of dotted keys (estimator hyperparameters, eval.*, synth.*).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set kle.t=0.5`; applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Master seed (bootstrap resampling, synthetic generation).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SelectionArgs {
    /// Comma-separated estimator ids, display names, families or `all`.
    #[arg(long)]
    pub estimators: Option<String>,
    /// Estimators to drop from the selection, same syntax as --estimators.
    #[arg(long)]
    pub exclude: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
    /// Trace file to score; its train-split records also feed the density models.
    #[arg(long)]
    pub traces: PathBuf,
    /// Extra train-split traces for the density models.
    #[arg(long)]
    pub train_traces: Option<PathBuf>,
    /// Background corpus for the relative-distance estimators.
    #[arg(long)]
    pub background_traces: Option<PathBuf>,
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Output subdirectory name (default: the trace file stem).
    #[arg(long)]
    pub run_id: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
    /// Trace file of one panel (repeat for several panels); supplies quality labels.
    #[arg(long, required = true)]
    pub traces: Vec<PathBuf>,
    /// Precomputed score tables aligned with --traces; scored on the fly when absent.
    #[arg(long)]
    pub scores: Vec<PathBuf>,
    /// Train traces, either one shared file or one per panel.
    #[arg(long)]
    pub train_traces: Vec<PathBuf>,
    /// Background corpora, either one shared file or one per panel.
    #[arg(long)]
    pub background_traces: Vec<PathBuf>,
    /// Bootstrap replicates.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Rank-calibration bins.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Resample whole queries instead of single responses.
    #[arg(long)]
    pub group_by_query: bool,
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Output subdirectory name (default: the panel name, or `eval` for several panels).
    #[arg(long)]
    pub run_id: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_background: Option<usize>,
    #[arg(long)]
    pub min_len: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub hallucination_rate: Option<f64>,
    /// Agreement between the planted uncertainty and quality, in [0, 1].
    #[arg(long)]
    pub signal: Option<f64>,
    /// Directory receiving eval.jsonl, train.jsonl and background.jsonl.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// metrics.csv, or a run directory containing it.
    pub path: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Score(a) => commands::score(&a).map(|_| ()),
        Command::Eval(a) => commands::eval(&a).map(|_| ()),
        Command::Synth(a) => commands::synth(&a),
        Command::Report(a) => {
            print!("{}", commands::report(&a.path)?);
            Ok(())
        }
    }
}
