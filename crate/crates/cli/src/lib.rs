//! The `solarec` command line: generate a corpus, fit and evaluate a
//! clustering model, simulate a community and rank admission candidates.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 on internal errors.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use solarec::clustering::Init;
use solarec::profiles::{Layout, Normalization};

pub use config::FileConfig;

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_PV_KW: f64 = 30.0;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 1,
            Self::Internal(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "solarec", version, about = "Energy community clustering, sharing simulation and admission ranking")]
pub struct Cli {
    /// JSON file with default values for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Suppress the human-readable summary on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus, a matching community and candidates.
    Gen(GenArgs),
    /// Fit a k-means model to a directory of consumption CSVs.
    Cluster(ClusterArgs),
    /// Score a model with WCSS, silhouette and, given labels, ROC-AUC and ARI.
    Evaluate(EvaluateArgs),
    /// Run the sharing simulation for a community file.
    Simulate(SimulateArgs),
    /// Rank candidate CSVs by the shared energy they would add.
    Recommend(RecommendArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub days: Option<u32>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Peak output of the community's single PV producer.
    #[arg(long)]
    pub pv_kw: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub layout: Option<Layout>,
    #[arg(long)]
    pub normalization: Option<Normalization>,
    /// Smallest accepted fraction of hours present.
    #[arg(long)]
    pub min_coverage: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub init: Option<Init>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[command(flatten)]
    pub profile: ProfileArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Corpus manifest, or a JSON object mapping consumer id to label.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub min_coverage: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub community: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Hourly trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub community: PathBuf,
    /// Directory of candidate CSVs; file stems become candidate ids.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Start fresh from this community (requires --model).
    #[arg(long, requires = "model")]
    pub community: Option<PathBuf>,
    #[arg(long, requires = "community")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Snapshot file; resumed from when no community is given.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub cors_origin: Option<String>,
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let ctx = commands::Context {
        quiet: cli.quiet || file.quiet.unwrap_or(false),
        seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        file,
    };
    match cli.command {
        Command::Gen(args) => commands::gen(&ctx, args),
        Command::Cluster(args) => commands::cluster(&ctx, args),
        Command::Evaluate(args) => commands::evaluate(&ctx, args),
        Command::Simulate(args) => commands::simulate(&ctx, args),
        Command::Recommend(args) => commands::recommend(&ctx, args),
        Command::Serve(args) => commands::serve(&ctx, args),
    }
}
