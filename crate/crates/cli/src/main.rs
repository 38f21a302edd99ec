//! `interbank`: generate synthetic markets, run cascade experiments and
//! re-aggregate their results.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime or
//! I/O error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use interbank_core::experiment::GridDesign;
use interbank_core::Measure;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "interbank", version, about = "Default cascades on daily interbank loan networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic transaction file from a market preset.
    Synth(SynthArgs),
    /// Run the full simulation matrix and write every report table.
    Run(RunArgs),
    /// Re-aggregate a raw run table.
    Summarize(SummarizeArgs),
    /// Check a dataset's daily moments against a preset.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
#[group(multiple = false)]
struct Source {
    /// Transaction file.
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Synthetic market preset (2006-like or 2011-like).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_name = "NAME", default_value = "2011-like")]
    preset: String,
    /// TOML table overriding individual preset fields.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Number of trading days.
    #[arg(long, value_name = "N")]
    days: Option<usize>,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// TOML experiment config; flags override its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    /// Null models, e.g. empirical,rewired,random,fixed-weight,random-fixed-weight.
    #[arg(long = "null-models", value_name = "LIST", value_delimiter = ',')]
    null_models: Option<Vec<String>>,
    #[arg(long, value_name = "N")]
    replicates: Option<usize>,
    /// Cascade-size threshold as a fraction; repeat for several.
    #[arg(long, value_name = "F")]
    threshold: Vec<f64>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Simulate only the first N trading days.
    #[arg(long, value_name = "N")]
    days: Option<usize>,
    #[arg(long, value_enum)]
    grid: Option<GridArg>,
}

#[derive(Debug, Args)]
struct SummarizeArgs {
    /// Raw run table (runs.csv).
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "nodes")]
    measure: MeasureArg,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    source: Source,
    /// Preset supplying the targets; defaults to --preset, else 2011-like.
    #[arg(long, value_name = "NAME")]
    against: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MeasureArg {
    Nodes,
    Lending,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::Nodes => Measure::Nodes,
            MeasureArg::Lending => Measure::Lending,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GridArg {
    Cross,
    Product,
}

impl From<GridArg> for GridDesign {
    fn from(g: GridArg) -> Self {
        match g {
            GridArg::Cross => GridDesign::Cross,
            GridArg::Product => GridDesign::Product,
        }
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Run(a) => commands::run(a),
        Command::Summarize(a) => commands::summarize(a),
        Command::Validate(a) => commands::validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("interbank: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
