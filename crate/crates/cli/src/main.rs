//! `armlet` drives training, evaluation, prediction, attribution reports,
//! and throughput benchmarks from the command line.
//!
//! Exit codes are a stable scripting contract:
//! 0 success, 2 config/path problems, 3 schema mismatch, 4 metric errors,
//! 5 argument errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use armlet_core::Error as CoreError;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError {
            code: 2,
            msg: msg.into(),
        }
    }

    pub fn argument(msg: impl Into<String>) -> Self {
        CliError {
            code: 5,
            msg: msg.into(),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::Argument(_) => 5,
            CoreError::Metric(_) => 4,
            CoreError::Schema(_) | CoreError::Data { .. } => 3,
            _ => 2,
        };
        CliError {
            code,
            msg: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::config(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "armlet",
    about = "Train, evaluate, and explain adaptive relation models over tabular data"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one model per seed and summarize test metrics.
    Train(TrainArgs),
    /// Evaluate a saved model on a dataset (AUC + logloss).
    Eval(EvalArgs),
    /// Score instances with a saved model, one `index,score` line each.
    Predict(PredictArgs),
    /// Write global/local attribution and the interaction-term catalog.
    Explain(ExplainArgs),
    /// Measure inference throughput across field counts.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
pub struct TrainArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    train_data: Option<PathBuf>,
    #[arg(long)]
    valid_data: Option<PathBuf>,
    #[arg(long)]
    test_data: Option<PathBuf>,
    /// Single data file, split in-process by --split-ratios/--data-seed.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Data format: indexed | csv.
    #[arg(long)]
    format: Option<String>,
    /// arm | arm_plus | lr | fm | fm_plus | dnn.
    #[arg(long)]
    model_kind: Option<String>,
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(long)]
    report_out: Option<PathBuf>,
    /// Attention heads (K).
    #[arg(long)]
    k: Option<usize>,
    /// Exponential neurons per head (o).
    #[arg(long)]
    o: Option<usize>,
    /// Entmax exponent.
    #[arg(long)]
    alpha: Option<f64>,
    /// Embedding size.
    #[arg(long)]
    n_emb: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Comma-separated training seeds, e.g. `--seed 1,2,3,4,5`.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Train seeds in parallel (summary stays seed-sorted).
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "indexed")]
    format: String,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "indexed")]
    format: String,
    /// Write predictions here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "indexed")]
    format: String,
    /// Interaction terms to keep, by descending frequency.
    #[arg(long, default_value_t = 8)]
    top_n: usize,
    /// Comma-separated instance indices for local attribution.
    #[arg(long)]
    instances: Option<String>,
    #[arg(long, default_value = "attribution.json")]
    out: PathBuf,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Comma-separated field counts.
    #[arg(long, default_value = "4,8,16,32,64")]
    m_list: String,
    #[arg(long, default_value_t = 2048)]
    batch: usize,
    /// Repetitions per field count (first is dropped as warm-up).
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 64)]
    o: usize,
    #[arg(long, default_value_t = 10)]
    n_emb: usize,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also write the JSON table here.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Internal parallelism cap; unset means single-threaded.
pub fn env_threads() -> usize {
    std::env::var("ARMLET_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1)
}

pub fn parse_u64_list(text: &str, flag: &str) -> Result<Vec<u64>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| CliError::argument(format!("{flag}: bad integer '{t}'")))
        })
        .collect()
}

pub fn parse_usize_list(text: &str, flag: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| CliError::argument(format!("{flag}: bad integer '{t}'")))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Train(args) => commands::train(args),
        Cmd::Eval(args) => commands::eval(args),
        Cmd::Predict(args) => commands::predict(args),
        Cmd::Explain(args) => commands::explain(args),
        Cmd::Bench(args) => commands::bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("armlet: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
