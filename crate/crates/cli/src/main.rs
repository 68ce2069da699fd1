use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod args;
mod commands;
mod output;

/// Finite-size yield bounds and exact simulation of hashing distillation.
#[derive(Parser)]
#[command(name = "hashdistill", version, about)]
struct Cli {
    /// Write output to this file instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Yield and rate lower bound for one IID Werner input.
    Bounds(BoundsArgs),
    /// Optimized rate bounds over a grid of input fidelities and sizes.
    RateCurve(RateCurveArgs),
    /// Smallest n with a positive guaranteed yield.
    Threshold(ThresholdArgs),
    /// Hartley and smooth Hartley entropies of IID Werner inputs.
    Entropy(EntropyArgs),
    /// Monte-Carlo fidelity sweep over round counts.
    Simulate(SimulateArgs),
    /// Syndrome, detection and correction report for fixed schedules.
    VerifyCodes(VerifyCodesArgs),
    /// Gate-level schedule for a set of round strings.
    Compile(CompileArgs),
    /// Density-matrix cross-check of one schedule (n <= 3).
    #[command(hide = true)]
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    /// Human-readable table followed by the JSON document.
    Table,
    Json,
}

#[derive(Clone, Copy, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Cnot,
    Cz,
    Both,
}

#[derive(Args, Serialize)]
pub struct BoundsArgs {
    /// Per-pair input fidelity.
    #[arg(long)]
    pub fidelity: f64,
    #[arg(long)]
    pub n: usize,
    /// Target output fidelity; sets eps = sqrt(1 - F_out).
    #[arg(long)]
    pub f_out: f64,
    /// `auto` or `eps1,eps2`.
    #[arg(long, default_value = "auto")]
    pub eps_split: String,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Args, Serialize)]
pub struct RateCurveArgs {
    /// Comma list or `a..b:step`.
    #[arg(long)]
    pub fidelity: String,
    /// Comma list or inclusive `a..b`.
    #[arg(long)]
    pub n: String,
    #[arg(long)]
    pub f_out: f64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Args, Serialize)]
pub struct ThresholdArgs {
    #[arg(long)]
    pub fidelity: String,
    #[arg(long)]
    pub f_out: f64,
    /// Largest n scanned.
    #[arg(long, default_value_t = 100_000)]
    pub n_max: usize,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Args, Serialize)]
pub struct EntropyArgs {
    #[arg(long)]
    pub fidelity: String,
    #[arg(long)]
    pub n: String,
    /// Smoothing parameters.
    #[arg(long, default_value = "0.1")]
    pub eps: String,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// IID Werner input fidelity.
    #[arg(long, conflicts_with = "distribution")]
    pub fidelity: Option<f64>,
    /// File of `label weight` lines, labels like `00 10 01`.
    #[arg(long, required_unless_present = "fidelity")]
    pub distribution: Option<PathBuf>,
    /// Round counts to report; defaults to `0..n-1`.
    #[arg(long)]
    pub rounds: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "cnot")]
    pub variant: String,
    /// `exact-branch` or `sampled-syndrome`.
    #[arg(long, default_value = "exact-branch")]
    pub mode: String,
    /// `none`, `top:K` or `mass:DELTA`.
    #[arg(long, default_value = "none")]
    pub truncation: String,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Args, Serialize)]
pub struct VerifyCodesArgs {
    /// Built-in schedule name; all built-ins when neither this nor --file is given.
    #[arg(long, conflicts_with = "file")]
    pub code: Option<String>,
    /// Custom schedule: one round string per line.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Intended use of a custom schedule.
    #[arg(long, default_value = "correct", value_parser = ["correct", "detect"])]
    pub mode: String,
    #[arg(long, value_enum, default_value = "both")]
    pub variant: VariantArg,
    #[arg(long, value_enum, default_value = "table")]
    pub format: TableFormat,
}

#[derive(Args, Serialize)]
pub struct CompileArgs {
    /// Built-in schedule name.
    #[arg(long, conflicts_with_all = ["file", "n"])]
    pub code: Option<String>,
    #[arg(long, conflicts_with = "n")]
    pub file: Option<PathBuf>,
    /// Pair count for a random schedule.
    #[arg(long, requires = "seed")]
    pub n: Option<usize>,
    /// Rounds of a random schedule; defaults to n - 1.
    #[arg(long, requires = "n")]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "cnot")]
    pub variant: String,
}

#[derive(Args, Serialize)]
pub struct OracleArgs {
    #[arg(long)]
    pub fidelity: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "cnot")]
    pub variant: String,
    /// Also validate every declared label map.
    #[arg(long)]
    pub check_labels: bool,
}

fn configure_threads() -> Result<()> {
    if let Ok(value) = std::env::var("HASHDISTILL_THREADS") {
        let threads: usize = value
            .parse()
            .with_context(|| format!("HASHDISTILL_THREADS=`{value}` is not a thread count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    configure_threads()?;
    let text = match &cli.command {
        Command::Bounds(a) => commands::bounds(a)?,
        Command::RateCurve(a) => commands::rate_curve(a)?,
        Command::Threshold(a) => commands::threshold(a)?,
        Command::Entropy(a) => commands::entropy(a)?,
        Command::Simulate(a) => commands::simulate(a)?,
        Command::VerifyCodes(a) => commands::verify_codes(a)?,
        Command::Compile(a) => commands::compile(a)?,
        Command::Oracle(a) => commands::oracle(a)?,
    };
    match &cli.output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
