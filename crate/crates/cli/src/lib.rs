//! Command-line front end for the quant8 numerics laboratory.
//!
//! Commands are thin orchestration over the library crate: they resolve
//! arguments (flags, then config file where applicable, then the
//! `QUANT8_SEED` environment fallback, then defaults), run the experiment,
//! and emit a report — CSV for tables, JSON for single objects. Every
//! report embeds a manifest of the fully resolved invocation; re-running
//! that manifest reproduces the report byte-for-byte except the timestamp.
//!
//! Rendering is separated from I/O so tests (and the reproducibility check)
//! can regenerate reports in memory: [`render`] computes everything,
//! [`execute`] writes it out.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod manifest;

pub use manifest::{strip_timestamps, Manifest};

#[derive(Debug, Parser)]
#[command(
    name = "quant8",
    version,
    about = "8-bit training-numerics laboratory: formats, quantized matmuls, error metrics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the constants of one or more 8-bit formats.
    Formats(FormatsArgs),
    /// Relative-error-vs-magnitude curve for one format (CSV).
    ErrorProfile(ErrorProfileArgs),
    /// Backward-error sweep over quantized matrix products (CSV).
    SweepBe(SweepBeArgs),
    /// Moment statistics of a tensor file (JSON).
    Profile(ProfileArgs),
    /// Quantize a tensor file onto an 8-bit grid.
    Quantize(QuantizeArgs),
    /// Train the toy network under a quantization config (CSV curves).
    TrainDemo(TrainDemoArgs),
    /// Suggest a format/granularity/rounding for a tensor (JSON).
    Recommend(RecommendArgs),
}

#[derive(Debug, Args)]
pub struct FormatsArgs {
    /// Format names (e.g. int8, e4m3, e5m2, e3m4, e2m5b2).
    #[arg(default_values_t = ["int8".to_string(), "e4m3".to_string(), "e5m2".to_string()])]
    pub names: Vec<String>,
    /// Also write the table as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ErrorProfileArgs {
    #[arg(long)]
    pub format: String,
    /// Smallest probed magnitude (must be positive).
    #[arg(long, default_value_t = 1e-6)]
    pub grid_min: f64,
    /// Largest probed magnitude; also the absmax the scale is anchored to.
    #[arg(long, default_value_t = 1.0)]
    pub grid_max: f64,
    #[arg(long, default_value_t = 400)]
    pub points: usize,
    /// rtne | stochastic
    #[arg(long, default_value = "rtne")]
    pub rounding: String,
    /// Defaults to $QUANT8_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepBeArgs {
    /// "t" sweeps --nu-list; any other distribution spec
    /// (e.g. "normal:mu=0,sigma=1") runs as a single setting.
    #[arg(long, default_value = "t")]
    pub dist: String,
    /// Comma-separated t-distribution normality parameters.
    #[arg(long, default_value = "2.5,3,5,10,30")]
    pub nu_list: String,
    /// Square matrix edge length.
    #[arg(long, default_value_t = 512)]
    pub size: usize,
    /// Comma-separated format names; every format x granularity pair runs.
    #[arg(long, default_value = "int8,e4m3,e5m2")]
    pub formats: String,
    /// Comma-separated granularities (tensor, channel, fine).
    #[arg(long, default_value = "tensor")]
    pub granularity: String,
    #[arg(long, default_value = "rtne")]
    pub rounding: String,
    /// Independent matrix draws per setting.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Defaults to $QUANT8_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub tensor_file: PathBuf,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "int8")]
    pub format: String,
    #[arg(long, default_value = "tensor")]
    pub granularity: String,
    #[arg(long, default_value = "rtne")]
    pub rounding: String,
    /// Only used by stochastic rounding. Defaults to $QUANT8_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainDemoArgs {
    /// TOML run config; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub inputs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub outputs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub eval_batch: Option<usize>,
    #[arg(long)]
    pub lr_head: Option<f64>,
    #[arg(long)]
    pub lr_features: Option<f64>,
    #[arg(long)]
    pub noise_cols: Option<usize>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub accuracy_tol: Option<f64>,
    /// Flag beats config file beats $QUANT8_SEED beats the default.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Weights-operand quantization: "off" or format/granularity/rounding.
    #[arg(long)]
    pub rhs: Option<String>,
    /// Activations-operand quantization: "off" or format/granularity/rounding.
    #[arg(long)]
    pub lhs: Option<String>,
    /// Upstream-gradient quantization: "off" or format/granularity/rounding.
    #[arg(long)]
    pub gradient: Option<String>,
    /// Accumulator: wide | bf16-demo.
    #[arg(long)]
    pub accum: Option<String>,
    /// Curves CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[arg(long)]
    pub tensor_file: PathBuf,
    /// rhs (weights) | lhs (activations) | gradient
    #[arg(long)]
    pub category: String,
    /// Restrict the recommendation to int8 (integer-only hardware).
    #[arg(long)]
    pub force_int8: bool,
    /// Excess-kurtosis threshold below which tails count as well-behaved.
    #[arg(long)]
    pub kurtosis_moderate: Option<f64>,
    /// Excess-kurtosis threshold at which tails count as extreme.
    #[arg(long)]
    pub kurtosis_extreme: Option<f64>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Everything a command produces, before any of it touches the filesystem.
#[derive(Debug, Default)]
pub struct Rendered {
    /// Summary lines for stdout (already newline-terminated).
    pub stdout: String,
    /// Report text (CSV or JSON) with its manifest embedded.
    pub report: Option<Vec<u8>>,
    /// Destination for `report`; stdout when `None`.
    pub out: Option<PathBuf>,
    /// Binary artifacts to write (tensor files).
    pub files: Vec<(PathBuf, Vec<u8>)>,
    /// Non-fatal notes, destined for stderr.
    pub warnings: Vec<String>,
}

/// Run a parsed command to completion in memory.
pub fn render(cli: &Cli) -> anyhow::Result<Rendered> {
    match &cli.command {
        Command::Formats(a) => commands::formats(a),
        Command::ErrorProfile(a) => commands::error_profile_cmd(a),
        Command::SweepBe(a) => commands::sweep_be(a),
        Command::Profile(a) => commands::profile(a),
        Command::Quantize(a) => commands::quantize_cmd(a),
        Command::TrainDemo(a) => commands::train_demo(a),
        Command::Recommend(a) => commands::recommend_cmd(a),
    }
}

/// Render, then write artifacts and print.
pub fn execute(cli: &Cli) -> anyhow::Result<()> {
    let rendered = render(cli)?;
    for w in &rendered.warnings {
        eprintln!("warning: {w}");
    }
    for (path, bytes) in &rendered.files {
        std::fs::write(path, bytes)?;
        eprintln!("wrote {}", path.display());
    }
    if let Some(report) = &rendered.report {
        match &rendered.out {
            Some(path) => {
                std::fs::write(path, report)?;
                eprintln!("wrote {}", path.display());
            }
            None => print!("{}", String::from_utf8_lossy(report)),
        }
    }
    print!("{}", rendered.stdout);
    Ok(())
}

/// Re-run the manifest embedded in `report_text` and return the fresh
/// rendering (nothing is written). Comparing old and new bytes through
/// [`strip_timestamps`] is the reproducibility contract.
pub fn regenerate(report_text: &str) -> anyhow::Result<Rendered> {
    let manifest = Manifest::from_report(report_text)?;
    let cli = Cli::try_parse_from(manifest.argv())?;
    render(&cli)
}
