use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use interbank_core::experiment::{read_runs, summarize as summarize_runs, write_summary};
use interbank_core::ingest::{parse_transactions, write_transactions, RecordFormat};
use interbank_core::synth::{generate_market, validate_against_preset};
use interbank_core::{run_experiment, ExperimentConfig, ExperimentError, InputSource, MarketPreset, NullModelKind};

use crate::{CliError, RunArgs, SummarizeArgs, SynthArgs, ValidateArgs};

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) | ExperimentError::Synth(_) => CliError::Config(e.to_string()),
            ExperimentError::Input { .. } | ExperimentError::Ingest(_) => CliError::Data(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn runtime(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Opens `path` for writing, or standard output when absent.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(runtime(dir))?;
            }
            Ok(Box::new(BufWriter::new(File::create(p).map_err(runtime(p))?)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn preset_named(name: &str) -> Result<MarketPreset, CliError> {
    MarketPreset::by_name(name).map_err(|e| CliError::Config(e.to_string()))
}

/// Applies a TOML table of field overrides to a preset.
fn override_preset(preset: MarketPreset, path: &Path) -> Result<MarketPreset, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let overrides: toml::Table = text.parse().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut table = toml::Table::try_from(&preset).map_err(|e| CliError::Config(e.to_string()))?;
    for (key, value) in overrides {
        if !table.contains_key(&key) {
            return Err(CliError::Config(format!("{}: unknown preset field `{key}`", path.display())));
        }
        table.insert(key, value);
    }
    toml::Value::Table(table).try_into().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub(crate) fn synth(args: SynthArgs) -> Result<(), CliError> {
    let mut preset = preset_named(&args.preset)?;
    if let Some(path) = &args.config {
        preset = override_preset(preset, path)?;
    }
    if let Some(seed) = args.seed {
        preset.seed = seed;
    }
    if let Some(days) = args.days {
        preset.n_days = days;
    }
    let txs = generate_market(&preset).map_err(|e| CliError::Config(e.to_string()))?;
    let mut out = sink(args.out.as_deref())?;
    write_transactions(&mut out, &txs, RecordFormat::default()).map_err(|e| CliError::Runtime(e.to_string()))?;
    out.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Some(path) = &args.out {
        eprintln!("{} transactions over {} days written to {}", txs.len(), preset.n_days, path.display());
    }
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn resolve_config(args: RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(path) = args.source.input {
        cfg.input = InputSource::Path(path);
    } else if let Some(name) = args.source.preset {
        cfg.input = InputSource::Preset(name);
    }
    if let Some(g) = args.gamma {
        cfg.gamma_grid = g;
    }
    if let Some(t) = args.theta {
        cfg.theta_grid = t;
    }
    if let Some(kinds) = args.null_models {
        cfg.null_kinds = kinds
            .iter()
            .map(|k| k.parse::<NullModelKind>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    if !args.threshold.is_empty() {
        cfg.thresholds = args.threshold;
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if args.days.is_some() {
        cfg.max_days = args.days;
    }
    if let Some(g) = args.grid {
        cfg.grid = g.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub(crate) fn run(args: RunArgs) -> Result<(), CliError> {
    let cfg = resolve_config(args)?;
    let manifest = run_experiment(&cfg)?;
    let s = &manifest.stats;
    eprintln!(
        "{} records from {} days ({} networks) written to {}",
        s.records,
        s.days,
        s.networks,
        cfg.out_dir.display()
    );
    if s.ineligible_seeds > 0 || s.partial_rewires > 0 || s.unconverged > 0 {
        eprintln!(
            "ineligible seeds {}, partial rewires {}, unconverged cascades {}",
            s.ineligible_seeds, s.partial_rewires, s.unconverged
        );
    }
    Ok(())
}

pub(crate) fn summarize(args: SummarizeArgs) -> Result<(), CliError> {
    let records = read_runs(&args.input).map_err(|e| CliError::Data(e.to_string()))?;
    if records.is_empty() {
        return Err(CliError::Data(format!("{}: no runs", args.input.display())));
    }
    let rows = summarize_runs(&records, args.measure.into());
    let mut out = sink(args.out.as_deref())?;
    write_summary(&mut out, &rows).map_err(|e| CliError::Runtime(e.to_string()))?;
    out.flush().map_err(|e| CliError::Runtime(e.to_string()))
}

pub(crate) fn validate(args: ValidateArgs) -> Result<(), CliError> {
    let target_name = args.against.as_deref().or(args.source.preset.as_deref()).unwrap_or("2011-like");
    let target = preset_named(target_name)?;
    let txs = match (&args.source.input, &args.source.preset) {
        (Some(path), _) => {
            let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            parse_transactions(BufReader::new(file), RecordFormat::default())
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        }
        (None, name) => {
            let preset = preset_named(name.as_deref().unwrap_or(target_name))?;
            generate_market(&preset).map_err(|e| CliError::Config(e.to_string()))?
        }
    };
    let checks = validate_against_preset(&txs, &target).map_err(|e| CliError::Data(e.to_string()))?;
    println!("{:<10} {:>12} {:>12} {:>12} {:>12}  result", "statistic", "target", "tolerance", "observed", "obs_sd");
    for c in &checks {
        println!(
            "{:<10} {:>12.2} {:>12.2} {:>12.2} {:>12.2}  {}",
            c.statistic,
            c.target,
            c.tolerance,
            c.observed,
            c.observed_sd,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(CliError::Data(format!("{failed} of {} checks failed against {}", checks.len(), target.name)));
    }
    Ok(())
}
