mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use misinfo_core::bias::{Attribute, Metric};

/// Misinformation spreading with peer correction, and classifier-bias
/// statistics.
#[derive(Debug, Parser)]
#[command(name = "misinfo", version)]
struct Cli {
    /// Worker threads (1 runs everything sequentially).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Master seed, overriding the one in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compartment distribution, degree moments and optionally a sampled network.
    Ensemble(RunArgs),
    /// Integrate the mean-field equations for one strain.
    Meanfield(RunArgs),
    /// Event-driven stochastic runs on a sampled or given network.
    Abm(RunArgs),
    /// Parameter sweep over gamma, q, alpha or lambda_ratio.
    Sweep(RunArgs),
    /// Datasets for the three-panel transition/profile figure.
    Fig4(RunArgs),
    /// Classifier-bias statistics.
    #[command(subcommand)]
    Stats(StatsCommand),
}

#[derive(Debug, Subcommand)]
enum StatsCommand {
    /// Bootstrap credibility that two groups differ.
    Compare(CompareArgs),
    /// Homophilic against heterophilic responses for one attribute.
    Partition(PartitionArgs),
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Matrix CSV (tp,fn,fp,tn) or response-record CSV.
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Record filter for A, e.g. `participant_race=white,perceived_race=poc|maybe_poc`.
    #[arg(long)]
    a_filter: Option<String>,
    #[arg(long)]
    b_filter: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "mcc")]
    metric: MetricArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PartitionArgs {
    #[arg(long)]
    records: PathBuf,
    /// gender, age or race.
    #[arg(long)]
    attribute: String,
    /// Restrict to records matching this filter first.
    #[arg(long)]
    filter: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "mcc")]
    metric: MetricArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum MetricArg {
    Mcc,
    Accuracy,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Metric {
        match m {
            MetricArg::Mcc => Metric::Mcc,
            MetricArg::Accuracy => Metric::Accuracy,
        }
    }
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(Vec<String>),
    Runtime(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl From<misinfo_core::Error> for Failure {
    fn from(e: misinfo_core::Error) -> Self {
        if e.is_config() {
            Failure::Config(vec![e.to_string()])
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Ensemble(a) => commands::ensemble(a),
        Command::Meanfield(a) => commands::meanfield(a),
        Command::Abm(a) => commands::abm(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Fig4(a) => commands::fig4(a),
        Command::Stats(StatsCommand::Compare(a)) => commands::compare(a),
        Command::Stats(StatsCommand::Partition(a)) => commands::partition(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(msgs) => {
                    eprintln!("error: invalid configuration");
                    for m in msgs {
                        eprintln!("  {m}");
                    }
                }
                Failure::Runtime(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}

fn parse_attribute(s: &str) -> Result<Attribute, Failure> {
    s.parse().map_err(|e: misinfo_core::Error| Failure::Config(vec![e.to_string()]))
}
