//! The simulation matrix: days × null models × replicates × parameter grid ×
//! seed banks, plus the report tables derived from it.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::{BalanceSheet, Params, SheetPolicy};
use crate::cascade::{eligible_seeds, CascadeError, CascadeState, Measure};
use crate::centrality::{self, bin_seed_samples, profiles, SeedSample, VictimCounts};
use crate::ingest::{
    build_daily_networks, parse_transactions, ActivityHistory, IngestError, LoanTransaction, RecordFormat,
};
use crate::network::{BankId, DailyNetwork};
use crate::nullmodel::{generate, rebuild_sheets, NullModelError, NullModelKind, RewireConfig};
use crate::seeding::derive_seed;
use crate::synth::{generate_market, MarketPreset, SynthError};

pub const DEFAULT_GAMMA_GRID: [f64; 7] = [0.01, 0.02, 0.03, 0.04, 0.05, 0.07, 0.10];
pub const DEFAULT_THETA_GRID: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputSource {
    Path(PathBuf),
    Preset(String),
}

/// How the γ and θ grids combine into simulated parameter points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridDesign {
    /// γ grid at the baseline θ plus θ grid at the baseline γ.
    #[default]
    Cross,
    /// Every (γ, θ) combination.
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewireSettings {
    pub weight_tolerance: f64,
    pub swaps_per_edge: usize,
    pub max_attempts_factor: usize,
}

impl Default for RewireSettings {
    fn default() -> Self {
        let d = RewireConfig::default();
        RewireSettings {
            weight_tolerance: d.weight_tolerance,
            swaps_per_edge: d.swaps_per_edge,
            max_attempts_factor: d.max_attempts_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub input: InputSource,
    /// Parameter point used for the seed-structure and victim tables.
    pub baseline: Params,
    pub gamma_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    pub grid: GridDesign,
    pub null_kinds: Vec<NullModelKind>,
    pub replicates: usize,
    pub thresholds: Vec<f64>,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    /// Simulate only the first this many trading days.
    pub max_days: Option<usize>,
    pub sheet_policy: SheetPolicy,
    pub rewire: RewireSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            input: InputSource::Preset("2011-like".into()),
            baseline: Params::default(),
            gamma_grid: DEFAULT_GAMMA_GRID.to_vec(),
            theta_grid: DEFAULT_THETA_GRID.to_vec(),
            grid: GridDesign::Cross,
            null_kinds: NullModelKind::ALL.to_vec(),
            replicates: 20,
            thresholds: vec![0.05],
            master_seed: 0,
            out_dir: PathBuf::from("out"),
            workers: 0,
            max_days: None,
            sheet_policy: SheetPolicy::Clamp,
            rewire: RewireSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.gamma_grid.is_empty() || self.theta_grid.is_empty() {
            return bad("parameter grids must be non-empty".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.null_kinds.is_empty() {
            return bad("at least one null model is required".into());
        }
        for p in self.points() {
            p.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        if let Some(t) = self.thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return bad(format!("threshold {t} outside (0, 1)"));
        }
        if self.rewire.weight_tolerance < 0.0 || self.rewire.swaps_per_edge == 0 {
            return bad("rewire tolerance must be >= 0 and swaps_per_edge >= 1".into());
        }
        if self.max_days == Some(0) {
            return bad("max_days must be positive".into());
        }
        Ok(())
    }

    /// Simulated parameter points, baseline included, sorted by (θ, γ).
    pub fn points(&self) -> Vec<Params> {
        let mut pts = vec![self.baseline];
        match self.grid {
            GridDesign::Cross => {
                pts.extend(self.gamma_grid.iter().map(|&g| Params { gamma: g, theta: self.baseline.theta }));
                pts.extend(self.theta_grid.iter().map(|&t| Params { gamma: self.baseline.gamma, theta: t }));
            }
            GridDesign::Product => {
                for &t in &self.theta_grid {
                    pts.extend(self.gamma_grid.iter().map(|&g| Params { gamma: g, theta: t }));
                }
            }
        }
        pts.sort_by(|a, b| a.theta.total_cmp(&b.theta).then(a.gamma.total_cmp(&b.gamma)));
        pts.dedup();
        pts
    }

    fn kinds(&self) -> Vec<NullModelKind> {
        let mut k = self.null_kinds.clone();
        k.sort();
        k.dedup();
        k
    }

    pub fn replicates_for(&self, kind: NullModelKind) -> usize {
        if kind == NullModelKind::Empirical {
            1
        } else {
            self.replicates
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("input {path}: {source}")]
    Input { path: PathBuf, source: IngestError },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{date} {kind} replicate {replicate}: {message}")]
    Simulation { date: NaiveDate, kind: NullModelKind, replicate: usize, message: String },
    #[error("{date} {kind} seed {seed}: {source}")]
    Cascade { date: NaiveDate, kind: NullModelKind, seed: BankId, source: CascadeError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Output { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

/// One simulation: a seed bank defaulted on one (day, null network, γ, θ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub date: NaiveDate,
    pub kind: NullModelKind,
    pub replicate: usize,
    pub seed_bank: BankId,
    pub gamma: f64,
    pub theta: f64,
    pub in_degree: usize,
    pub out_degree: usize,
    pub closeness: f64,
    pub core_number: usize,
    pub initial_shock: f64,
    pub defaulted_count: usize,
    pub node_fraction: f64,
    pub lending_loss: f64,
    pub loss_fraction: f64,
    pub rounds: u32,
    pub passes: u32,
    pub converged: bool,
}

impl RunRecord {
    pub fn size(&self, measure: Measure) -> f64 {
        match measure {
            Measure::Nodes => self.node_fraction,
            Measure::Lending => self.loss_fraction,
        }
    }

    fn key_cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.date, self.kind, self.replicate, self.seed_bank)
            .cmp(&(other.date, other.kind, other.replicate, other.seed_bank))
            .then(self.gamma.total_cmp(&other.gamma))
            .then(self.theta.total_cmp(&other.theta))
    }
}

/// Loaded input: transactions, netted days and volume history.
#[derive(Debug, Clone)]
pub struct MarketData {
    pub networks: Vec<DailyNetwork>,
    pub history: ActivityHistory,
    pub transactions: usize,
}

impl MarketData {
    pub fn from_transactions(txs: &[LoanTransaction]) -> Result<Self, IngestError> {
        Ok(MarketData {
            networks: build_daily_networks(txs)?,
            history: ActivityHistory::from_transactions(txs),
            transactions: txs.len(),
        })
    }

    pub fn load(input: &InputSource) -> Result<Self, ExperimentError> {
        match input {
            InputSource::Preset(name) => {
                let txs = generate_market(&MarketPreset::by_name(name)?)?;
                Ok(MarketData::from_transactions(&txs)?)
            }
            InputSource::Path(path) => {
                let wrap = |source| ExperimentError::Input { path: path.clone(), source };
                let file = File::open(path).map_err(|e| wrap(IngestError::Io(e)))?;
                let txs = parse_transactions(std::io::BufReader::new(file), RecordFormat::default()).map_err(wrap)?;
                MarketData::from_transactions(&txs).map_err(wrap)
            }
        }
    }
}

/// Per-run bookkeeping that is not part of any single record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub days: usize,
    pub empty_days: usize,
    pub networks: usize,
    pub records: usize,
    /// Nodes without any lender, which cannot seed a cascade.
    pub ineligible_seeds: usize,
    pub partial_rewires: usize,
    pub clamped_sheets: usize,
    pub unconverged: usize,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub records: Vec<RunRecord>,
    /// Victim default counts on the empirical networks at the baseline.
    pub victims: VictimCounts,
    pub stats: RunStats,
}

struct Job<'a> {
    day: usize,
    net: &'a DailyNetwork,
    kind: NullModelKind,
    replicate: usize,
}

struct JobOutput {
    records: Vec<RunRecord>,
    victims: VictimCounts,
    ineligible: usize,
    partial_rewire: bool,
    clamped: usize,
}

/// Runs the whole matrix in memory.
pub fn simulate(cfg: &ExperimentConfig, data: &MarketData) -> Result<SimulationOutput, ExperimentError> {
    cfg.validate()?;
    let days: Vec<&DailyNetwork> = data.networks.iter().filter(|n| !n.is_empty()).collect();
    let days = &days[..cfg.max_days.map_or(days.len(), |m| m.min(days.len()))];
    let empty_days = data.networks.iter().filter(|n| n.is_empty()).count();
    let points = cfg.points();
    let kinds = cfg.kinds();
    let jobs: Vec<Job> = days
        .iter()
        .enumerate()
        .flat_map(|(day, &net)| {
            kinds.iter().flat_map(move |&kind| {
                (0..cfg.replicates_for(kind)).map(move |replicate| Job { day, net, kind, replicate })
            })
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| ExperimentError::Config(format!("worker pool: {e}")))?;
    let outputs: Vec<JobOutput> =
        pool.install(|| jobs.par_iter().map(|job| run_job(cfg, data, &points, job)).collect::<Result<_, _>>())?;

    let mut stats = RunStats { days: days.len(), empty_days, networks: jobs.len(), ..RunStats::default() };
    let mut victims = VictimCounts::default();
    let mut records = Vec::new();
    for out in outputs {
        stats.ineligible_seeds += out.ineligible;
        stats.partial_rewires += usize::from(out.partial_rewire);
        stats.clamped_sheets += out.clamped;
        victims.merge(&out.victims);
        records.extend(out.records);
    }
    records.sort_by(RunRecord::key_cmp);
    stats.records = records.len();
    stats.unconverged = records.iter().filter(|r| !r.converged).count();
    Ok(SimulationOutput { records, victims, stats })
}

fn run_job(
    cfg: &ExperimentConfig,
    data: &MarketData,
    points: &[Params],
    job: &Job,
) -> Result<JobOutput, ExperimentError> {
    let date = job.net.date();
    let sim_err =
        |message: String| ExperimentError::Simulation { date, kind: job.kind, replicate: job.replicate, message };
    let seed = derive_seed(cfg.master_seed, &[job.day as u64, job.kind.code(), job.replicate as u64]);
    let rewire_cfg = RewireConfig {
        weight_tolerance: cfg.rewire.weight_tolerance,
        swaps_per_edge: cfg.rewire.swaps_per_edge,
        max_attempts_factor: cfg.rewire.max_attempts_factor,
        seed,
    };
    let null = generate(job.kind, job.net, &rewire_cfg).map_err(|e| sim_err(e.to_string()))?;
    let net = &null.network;
    let baseline_tv: Vec<f64> = job
        .net
        .nodes()
        .iter()
        .map(|&b| data.history.rolling_volume(b, date))
        .collect::<Result<_, _>>()
        .map_err(|e| sim_err(e.to_string()))?;
    let prof = profiles(net);
    let seeds = eligible_seeds(net);
    let mut out = JobOutput {
        records: Vec::with_capacity(seeds.len() * points.len()),
        victims: VictimCounts::default(),
        ineligible: (net.node_count() - seeds.len()) * points.len(),
        partial_rewire: null.rewire.as_ref().is_some_and(|r| r.is_partial()),
        clamped: 0,
    };
    let mut defaulted = vec![false; net.node_count()];
    for &p in points {
        let sheets: Vec<BalanceSheet> = rebuild_sheets(job.kind, net, |i| baseline_tv[i], p, cfg.sheet_policy)
            .map_err(|e: NullModelError| sim_err(e.to_string()))?;
        out.clamped += sheets.iter().filter(|s| s.clamped).count();
        let mut state = CascadeState::new(net, &sheets).map_err(|e| sim_err(e.to_string()))?;
        let track_victims = job.kind == NullModelKind::Empirical && p == cfg.baseline;
        for &s in &seeds {
            let r =
                state.run(s).map_err(|source| ExperimentError::Cascade { date, kind: job.kind, seed: s, source })?;
            let i = net.index_of(s).expect("seed is a node");
            if track_victims {
                for (k, d) in defaulted.iter_mut().enumerate() {
                    *d = state.is_defaulted(k);
                }
                out.victims.record(&prof, s, &defaulted);
            }
            let sp = &prof[i];
            out.records.push(RunRecord {
                date,
                kind: job.kind,
                replicate: job.replicate,
                seed_bank: s,
                gamma: p.gamma,
                theta: p.theta,
                in_degree: sp.in_degree,
                out_degree: sp.out_degree,
                closeness: sp.closeness,
                core_number: sp.core_number,
                initial_shock: r.initial_shock,
                defaulted_count: r.defaulted_count,
                node_fraction: r.node_fraction,
                lending_loss: r.lending_loss,
                loss_fraction: r.loss_fraction,
                rounds: r.rounds,
                passes: r.passes,
                converged: r.converged,
            });
        }
    }
    Ok(out)
}

/// Aggregate of cascade sizes for one (kind, γ, θ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub kind: NullModelKind,
    pub gamma: f64,
    pub theta: f64,
    pub runs: usize,
    pub mean: f64,
    pub std_error: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Share of runs with at least one knock-on default.
    pub knock_on_share: f64,
    /// `mean / empirical mean`; empty without empirical runs at this point.
    pub ratio: Option<f64>,
    /// Set when the empirical mean is zero and the ratio is reported as 1.
    pub ratio_zero: bool,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and standard error of a sorted sample.
fn sorted_mean_se(sorted: &[f64]) -> (f64, f64) {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    if sorted.len() < 2 {
        return (mean, 0.0);
    }
    let var = sorted.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregates raw runs per (kind, γ, θ), with ratios to the empirical model.
pub fn summarize(records: &[RunRecord], measure: Measure) -> Vec<SummaryRow> {
    type Key = (NullModelKind, u64, u64);
    let mut groups: BTreeMap<Key, (Vec<f64>, usize)> = BTreeMap::new();
    for r in records {
        let g = groups.entry((r.kind, r.theta.to_bits(), r.gamma.to_bits())).or_default();
        g.0.push(r.size(measure));
        g.1 += usize::from(r.defaulted_count > 0);
    }
    let mut rows: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((kind, theta, gamma), (mut xs, knock))| {
            xs.sort_by(f64::total_cmp);
            let (mean, std_error) = sorted_mean_se(&xs);
            SummaryRow {
                kind,
                gamma: f64::from_bits(gamma),
                theta: f64::from_bits(theta),
                runs: xs.len(),
                mean,
                std_error,
                median: quantile(&xs, 0.5),
                q1: quantile(&xs, 0.25),
                q3: quantile(&xs, 0.75),
                knock_on_share: knock as f64 / xs.len() as f64,
                ratio: None,
                ratio_zero: false,
            }
        })
        .collect();
    let empirical: BTreeMap<(u64, u64), f64> = rows
        .iter()
        .filter(|r| r.kind == NullModelKind::Empirical)
        .map(|r| ((r.theta.to_bits(), r.gamma.to_bits()), r.mean))
        .collect();
    for row in &mut rows {
        if let Some(&e) = empirical.get(&(row.theta.to_bits(), row.gamma.to_bits())) {
            if e == 0.0 {
                row.ratio = Some(1.0);
                row.ratio_zero = true;
            } else {
                row.ratio = Some(row.mean / e);
            }
        }
    }
    rows.sort_by(|a, b| a.kind.cmp(&b.kind).then(a.theta.total_cmp(&b.theta)).then(a.gamma.total_cmp(&b.gamma)));
    rows
}

/// Per-day aggregate for one (kind, γ, θ).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailyRow {
    pub date: NaiveDate,
    pub kind: NullModelKind,
    pub gamma: f64,
    pub theta: f64,
    pub runs: usize,
    pub mean_nodes: f64,
    pub mean_lending: f64,
    pub knock_on_share: f64,
    pub threshold: f64,
    pub share_above_nodes: f64,
    pub share_above_lending: f64,
}

pub fn daily_table(records: &[RunRecord], thresholds: &[f64]) -> Vec<DailyRow> {
    let mut groups: BTreeMap<(NaiveDate, NullModelKind, u64, u64), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.date, r.kind, r.theta.to_bits(), r.gamma.to_bits())).or_default().push(r);
    }
    let mut rows = Vec::new();
    for ((date, kind, theta, gamma), rs) in groups {
        let n = rs.len() as f64;
        let mean = |m: Measure| {
            let mut xs: Vec<f64> = rs.iter().map(|r| r.size(m)).collect();
            xs.sort_by(f64::total_cmp);
            xs.iter().sum::<f64>() / n
        };
        let (mean_nodes, mean_lending) = (mean(Measure::Nodes), mean(Measure::Lending));
        let knock_on_share = rs.iter().filter(|r| r.defaulted_count > 0).count() as f64 / n;
        for &t in thresholds {
            let share = |m: Measure| rs.iter().filter(|r| r.size(m) > t).count() as f64 / n;
            rows.push(DailyRow {
                date,
                kind,
                gamma: f64::from_bits(gamma),
                theta: f64::from_bits(theta),
                runs: rs.len(),
                mean_nodes,
                mean_lending,
                knock_on_share,
                threshold: t,
                share_above_nodes: share(Measure::Nodes),
                share_above_lending: share(Measure::Lending),
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub crate_version: String,
    pub config: ExperimentConfig,
    pub stats: RunStats,
    pub files: Vec<String>,
}

fn write_csv<T: Serialize>(
    dir: &Path,
    name: &str,
    rows: impl IntoIterator<Item = T>,
) -> Result<String, ExperimentError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(io_err(&path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for row in rows {
        w.serialize(row).map_err(|e| ExperimentError::Output { path: path.clone(), message: e.to_string() })?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(name.to_string())
}

#[derive(Serialize)]
struct BinRow<'a> {
    measure: &'a str,
    variable: &'a str,
    index: i64,
    lower: f64,
    upper: f64,
    mean: f64,
    std_error: f64,
    count: usize,
}

#[derive(Serialize)]
struct CellRow<'a> {
    measure: &'a str,
    x_variable: &'a str,
    y_variable: &'a str,
    x_index: i64,
    y_index: i64,
    x_lower: f64,
    y_lower: f64,
    mean: f64,
    std_error: f64,
    count: usize,
}

fn bin_rows<'a>(measure: &'a str, stat: &'a centrality::BinnedStatistic) -> impl Iterator<Item = BinRow<'a>> {
    stat.bins.iter().map(move |b| BinRow {
        measure,
        variable: &stat.variable,
        index: b.index,
        lower: b.lower,
        upper: b.upper,
        mean: b.mean,
        std_error: b.std_error,
        count: b.count,
    })
}

fn cell_rows<'a>(measure: &'a str, map: &'a centrality::HeatMap) -> impl Iterator<Item = CellRow<'a>> {
    map.cells.iter().map(move |c| CellRow {
        measure,
        x_variable: &map.x_variable,
        y_variable: &map.y_variable,
        x_index: c.x_index,
        y_index: c.y_index,
        x_lower: c.x_lower,
        y_lower: c.y_lower,
        mean: c.mean,
        std_error: c.std_error,
        count: c.count,
    })
}

#[derive(Serialize)]
struct NullRow {
    date: NaiveDate,
    kind: NullModelKind,
    runs: usize,
    mean_nodes: f64,
    mean_lending: f64,
}

#[derive(Serialize)]
struct DeviationRow {
    measure: &'static str,
    kind: NullModelKind,
    gamma: f64,
    mean: f64,
    std_error: f64,
    deviation: Option<f64>,
    deviation_se: Option<f64>,
}

const MEASURES: [(Measure, &str); 2] = [(Measure::Nodes, "nodes"), (Measure::Lending, "lending")];

/// Writes every table of a finished simulation into `dir`.
pub fn write_outputs(cfg: &ExperimentConfig, sim: &SimulationOutput, dir: &Path) -> Result<Manifest, ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = Vec::new();
    let config_path = dir.join("config.toml");
    let echo = toml::to_string(cfg)
        .map_err(|e| ExperimentError::Output { path: config_path.clone(), message: e.to_string() })?;
    fs::write(&config_path, echo).map_err(io_err(&config_path))?;
    files.push("config.toml".to_string());

    files.push(write_csv(dir, "runs.csv", &sim.records)?);
    files.push(write_csv(dir, "daily.csv", daily_table(&sim.records, &cfg.thresholds))?);
    for (m, name) in MEASURES {
        files.push(write_csv(dir, &format!("summary_{name}.csv"), summarize(&sim.records, m))?);
    }

    let base: Vec<&RunRecord> = sim
        .records
        .iter()
        .filter(|r| {
            r.kind == NullModelKind::Empirical && r.gamma == cfg.baseline.gamma && r.theta == cfg.baseline.theta
        })
        .collect();
    let mut by_shock = Vec::new();
    let mut degree_maps = Vec::new();
    let mut shock_maps = Vec::new();
    let mut by_core = Vec::new();
    for (m, name) in MEASURES {
        let samples: Vec<SeedSample> = base
            .iter()
            .map(|r| SeedSample {
                in_degree: r.in_degree,
                out_degree: r.out_degree,
                core_number: r.core_number,
                shock: r.initial_shock,
                size: r.size(m),
            })
            .collect();
        if let Ok(t) = bin_seed_samples(&samples) {
            by_shock.push((name, t.by_shock));
            degree_maps.push((name, t.degree_map));
            shock_maps.push((name, t.shock_map));
            by_core.push((name, t.by_core));
        }
    }
    files.push(write_csv(dir, "size_by_shock.csv", by_shock.iter().flat_map(|(m, s)| bin_rows(m, s)))?);
    files.push(write_csv(dir, "heatmap_degree.csv", degree_maps.iter().flat_map(|(m, h)| cell_rows(m, h)))?);
    files.push(write_csv(dir, "heatmap_shock.csv", shock_maps.iter().flat_map(|(m, h)| cell_rows(m, h)))?);
    let curves = sim.victims.curves();
    files.push(write_csv(dir, "victim_probability.csv", curves.iter().flat_map(|s| bin_rows("probability", s)))?);
    files.push(write_csv(dir, "size_by_core.csv", by_core.iter().flat_map(|(m, s)| bin_rows(m, s)))?);

    let daily_rows = daily_table(&sim.records, &[0.05])
        .into_iter()
        .filter(|r| r.gamma == cfg.baseline.gamma && r.theta == cfg.baseline.theta)
        .map(|r| NullRow {
            date: r.date,
            kind: r.kind,
            runs: r.runs,
            mean_nodes: r.mean_nodes,
            mean_lending: r.mean_lending,
        });
    files.push(write_csv(dir, "null_model_daily.csv", daily_rows)?);

    let mut deviations = Vec::new();
    for (m, name) in MEASURES {
        let rows = summarize(&sim.records, m);
        let emp: BTreeMap<u64, f64> = rows
            .iter()
            .filter(|r| r.kind == NullModelKind::Empirical && r.theta == cfg.baseline.theta)
            .map(|r| (r.gamma.to_bits(), r.mean))
            .collect();
        for r in rows.iter().filter(|r| r.theta == cfg.baseline.theta) {
            let e = emp.get(&r.gamma.to_bits()).copied().filter(|&e| e > 0.0);
            deviations.push(DeviationRow {
                measure: name,
                kind: r.kind,
                gamma: r.gamma,
                mean: r.mean,
                std_error: r.std_error,
                deviation: e.map(|e| r.mean / e),
                deviation_se: e.map(|e| r.std_error / e),
            });
        }
    }
    files.push(write_csv(dir, "null_model_deviation.csv", deviations)?);

    let manifest = Manifest {
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        stats: sim.stats.clone(),
        files: {
            files.push("manifest.json".to_string());
            files
        },
    };
    let path = dir.join("manifest.json");
    let mut f = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    serde_json::to_writer_pretty(&mut f, &manifest)
        .map_err(|e| ExperimentError::Output { path: path.clone(), message: e.to_string() })?;
    writeln!(f).and_then(|_| f.flush()).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Loads the input, simulates the matrix and writes every table.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Manifest, ExperimentError> {
    cfg.validate()?;
    let data = MarketData::load(&cfg.input)?;
    let sim = simulate(cfg, &data)?;
    write_outputs(cfg, &sim, &cfg.out_dir)
}

/// Reads a raw run table written by [`write_outputs`].
pub fn read_runs(path: &Path) -> Result<Vec<RunRecord>, ExperimentError> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| ExperimentError::Output { path: path.to_path_buf(), message: e.to_string() })?;
    r.deserialize()
        .collect::<Result<Vec<RunRecord>, _>>()
        .map_err(|e| ExperimentError::Output { path: path.to_path_buf(), message: e.to_string() })
}

/// Writes a summary table as CSV.
pub fn write_summary<W: Write>(writer: W, rows: &[SummaryRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::money::Money;

    fn tx(day: u32, lender: u32, borrower: u32, amount: i64) -> LoanTransaction {
        LoanTransaction {
            date: NaiveDate::from_ymd_opt(2011, 3, day).unwrap(),
            time: chrono::NaiveTime::from_hms_opt(10, 0, 0).unwrap(),
            lender: BankId(lender),
            borrower: BankId(borrower),
            amount: Money::from_whole(amount),
            rate: 1.0,
            aggressor: crate::ingest::Aggressor::Unknown,
        }
    }

    fn toy() -> MarketData {
        MarketData::from_transactions(&[tx(1, 1, 2, 10), tx(1, 2, 3, 5), tx(1, 4, 3, 7), tx(1, 3, 4, 2)]).unwrap()
    }

    fn empirical_only() -> ExperimentConfig {
        ExperimentConfig {
            null_kinds: vec![NullModelKind::Empirical],
            gamma_grid: vec![0.05],
            theta_grid: vec![0.2],
            replicates: 1,
            workers: 1,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn one_record_per_borrower() {
        let sim = simulate(&empirical_only(), &toy()).unwrap();
        // Borrowers after netting: 2 and 3.
        assert_eq!(sim.records.len(), 2);
        assert_eq!(sim.stats.ineligible_seeds, 2);
        let seeds: Vec<u32> = sim.records.iter().map(|r| r.seed_bank.0).collect();
        assert_eq!(seeds, vec![2, 3]);
    }

    #[test]
    fn cross_grid_points() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.points().len(), 7 + 5 - 1);
        let product = ExperimentConfig { grid: GridDesign::Product, ..cfg };
        assert_eq!(product.points().len(), 35);
    }

    #[test]
    fn record_count_matches_matrix() {
        let cfg = ExperimentConfig {
            null_kinds: vec![NullModelKind::Empirical, NullModelKind::FixedWeight, NullModelKind::Random],
            replicates: 3,
            workers: 2,
            ..ExperimentConfig::default()
        };
        let data = toy();
        let sim = simulate(&cfg, &data).unwrap();
        let n = data.networks[0].node_count();
        let networks = 1 + 3 + 3;
        assert_eq!(sim.stats.networks, networks);
        assert_eq!(sim.records.len() + sim.stats.ineligible_seeds, networks * n * cfg.points().len());
    }

    #[test]
    fn all_zero_cascades_give_unit_ratio() {
        // Huge capital: nothing beyond the seed defaults.
        let cfg = ExperimentConfig {
            baseline: Params { theta: 0.1, gamma: 0.9 },
            gamma_grid: vec![0.9],
            theta_grid: vec![0.1],
            null_kinds: vec![NullModelKind::Empirical, NullModelKind::FixedWeight],
            replicates: 1,
            ..ExperimentConfig::default()
        };
        let sim = simulate(&cfg, &toy()).unwrap();
        let rows = summarize(&sim.records, Measure::Nodes);
        assert_eq!(rows.len(), 2);
        for r in rows {
            assert_eq!(r.mean, 0.0);
            assert_eq!(r.ratio, Some(1.0));
            assert!(r.ratio_zero);
        }
    }

    #[test]
    fn quartiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.5), 2.5);
        assert_eq!(quantile(&xs, 0.25), 1.75);
        assert_eq!(quantile(&[7.0], 0.75), 7.0);
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            ExperimentConfig { gamma_grid: vec![], ..ExperimentConfig::default() },
            ExperimentConfig { replicates: 0, ..ExperimentConfig::default() },
            ExperimentConfig { thresholds: vec![1.5], ..ExperimentConfig::default() },
            ExperimentConfig { theta_grid: vec![0.0], ..ExperimentConfig::default() },
        ] {
            assert!(matches!(cfg.validate(), Err(ExperimentError::Config(_))));
        }
    }

    #[test]
    fn config_toml_roundtrip() {
        let cfg = ExperimentConfig {
            input: InputSource::Path("data.csv".into()),
            max_days: Some(3),
            ..ExperimentConfig::default()
        };
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<ExperimentConfig>(&text).unwrap(), cfg);
        let partial: ExperimentConfig = toml::from_str("replicates = 4\n[input]\npreset = \"2006-like\"\n").unwrap();
        assert_eq!(partial.replicates, 4);
        assert_eq!(partial.input, InputSource::Preset("2006-like".into()));
    }
}
