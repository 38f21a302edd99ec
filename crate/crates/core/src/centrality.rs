//! Node centrality and binned cascade statistics.
//!
//! Closeness and core numbers are computed on the undirected, unweighted
//! projection of a day's network. Closeness follows the Wasserman–Faust
//! convention for disconnected graphs: the within-component closeness
//! `(n_c − 1) / Σ d(i, j)` is scaled by `(n_c − 1) / (n − 1)`.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade::{CascadeResult, Measure};
use crate::network::{BankId, DailyNetwork};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CentralityError {
    #[error("bank {0} is not active in this network")]
    Inactive(BankId),
    #[error("cannot bin an empty sample")]
    EmptySample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralityProfile {
    pub bank: BankId,
    pub in_degree: usize,
    pub out_degree: usize,
    pub closeness: f64,
    pub core_number: usize,
}

/// Closeness of every node, index-aligned with `net.nodes()`.
pub fn closeness_all(net: &DailyNetwork) -> Vec<f64> {
    let adj = net.undirected_adjacency();
    let n = adj.len();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    let mut out = vec![0.0; n];
    for (src, slot) in out.iter_mut().enumerate() {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[src] = 0;
        queue.push_back(src);
        let (mut reached, mut total) = (0usize, 0usize);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    reached += 1;
                    total += dist[v];
                    queue.push_back(v);
                }
            }
        }
        if reached > 0 {
            let within = reached as f64 / total as f64;
            *slot = within * reached as f64 / (n - 1) as f64;
        }
    }
    out
}

pub fn closeness(net: &DailyNetwork, bank: BankId) -> Result<f64, CentralityError> {
    let i = net.index_of(bank).ok_or(CentralityError::Inactive(bank))?;
    Ok(closeness_all(net)[i])
}

/// Core number of every node (bucket-based peeling).
pub fn core_numbers(net: &DailyNetwork) -> Vec<usize> {
    let adj = net.undirected_adjacency();
    let n = adj.len();
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let max_deg = degree.iter().copied().max().unwrap_or(0);
    // Nodes sorted by degree with position index, as in Batagelj–Zaversnik.
    let mut bin_start = vec![0usize; max_deg + 2];
    for &d in &degree {
        bin_start[d + 1] += 1;
    }
    for d in 0..=max_deg {
        bin_start[d + 1] += bin_start[d];
    }
    let mut order = vec![0usize; n];
    let mut pos = vec![0usize; n];
    let mut next = bin_start.clone();
    for v in 0..n {
        pos[v] = next[degree[v]];
        order[pos[v]] = v;
        next[degree[v]] += 1;
    }
    for k in 0..n {
        let v = order[k];
        for &u in &adj[v] {
            if degree[u] > degree[v] {
                let du = degree[u];
                let pu = pos[u];
                let pw = bin_start[du];
                let w = order[pw];
                if u != w {
                    order.swap(pu, pw);
                    pos[u] = pw;
                    pos[w] = pu;
                }
                bin_start[du] += 1;
                degree[u] -= 1;
            }
        }
    }
    degree
}

pub fn core_number(net: &DailyNetwork, bank: BankId) -> Result<usize, CentralityError> {
    let i = net.index_of(bank).ok_or(CentralityError::Inactive(bank))?;
    Ok(core_numbers(net)[i])
}

/// Degree, closeness and core number of every node.
pub fn profiles(net: &DailyNetwork) -> Vec<CentralityProfile> {
    let close = closeness_all(net);
    let cores = core_numbers(net);
    (0..net.node_count())
        .map(|i| CentralityProfile {
            bank: net.bank(i),
            in_degree: net.in_degree(i),
            out_degree: net.out_degree(i),
            closeness: close[i],
            core_number: cores[i],
        })
        .collect()
}

/// Partition of the real line into bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Binning {
    /// Bins `[origin + k·width, origin + (k+1)·width)`.
    Linear { origin: f64, width: f64 },
    /// Bins of width `width` in `log10(x)`; non-positive values go to a
    /// dedicated underflow bin.
    Log10 { width: f64 },
}

impl Binning {
    pub const UNIT: Binning = Binning::Linear { origin: 0.0, width: 1.0 };
    pub const CLOSENESS: Binning = Binning::Linear { origin: 0.0, width: 0.02 };
    pub const SHOCK: Binning = Binning::Log10 { width: 0.25 };

    pub fn index(&self, x: f64) -> i64 {
        match *self {
            Binning::Linear { origin, width } => ((x - origin) / width + 1e-9).floor() as i64,
            Binning::Log10 { width } => {
                if x > 0.0 {
                    (x.log10() / width + 1e-9).floor() as i64
                } else {
                    i64::MIN
                }
            }
        }
    }

    pub fn bounds(&self, index: i64) -> (f64, f64) {
        match *self {
            Binning::Linear { origin, width } => (origin + index as f64 * width, origin + (index + 1) as f64 * width),
            Binning::Log10 { width } => {
                if index == i64::MIN {
                    (f64::NEG_INFINITY, 0.0)
                } else {
                    (10f64.powf(index as f64 * width), 10f64.powf((index + 1) as f64 * width))
                }
            }
        }
    }
}

/// Order-independent mean / standard-error accumulator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    values: Vec<f64>,
}

impl SampleSet {
    pub fn push(&mut self, x: f64) {
        self.values.push(x);
    }

    pub fn extend(&mut self, other: &SampleSet) {
        self.values.extend_from_slice(&other.values);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(mean, standard error)` with values summed in sorted order.
    pub fn mean_se(&self) -> (f64, f64) {
        let n = self.values.len();
        if n == 0 {
            return (f64::NAN, f64::NAN);
        }
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return (mean, 0.0);
        }
        let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        (mean, sd / (n as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub index: i64,
    pub lower: f64,
    pub upper: f64,
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
}

/// A 1-D curve: mean of a response per bin of an explanatory variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedStatistic {
    pub variable: String,
    pub binning: Binning,
    pub bins: Vec<Bin>,
}

impl BinnedStatistic {
    pub fn total_count(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn bin(&self, index: i64) -> Option<&Bin> {
        self.bins.iter().find(|b| b.index == index)
    }
}

/// Bins `(x, y)` samples on `x` and reports the mean of `y` per bin.
pub fn bin_samples(
    variable: &str,
    binning: Binning,
    samples: impl IntoIterator<Item = (f64, f64)>,
) -> Result<BinnedStatistic, CentralityError> {
    let mut groups: BTreeMap<i64, SampleSet> = BTreeMap::new();
    for (x, y) in samples {
        groups.entry(binning.index(x)).or_default().push(y);
    }
    if groups.is_empty() {
        return Err(CentralityError::EmptySample);
    }
    Ok(finish_1d(variable, binning, groups))
}

fn finish_1d(variable: &str, binning: Binning, groups: BTreeMap<i64, SampleSet>) -> BinnedStatistic {
    let bins = groups
        .into_iter()
        .map(|(index, set)| {
            let (mean, std_error) = set.mean_se();
            let (lower, upper) = binning.bounds(index);
            Bin { index, lower, upper, mean, std_error, count: set.len() }
        })
        .collect();
    BinnedStatistic { variable: variable.to_string(), binning, bins }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub x_index: i64,
    pub y_index: i64,
    pub x_lower: f64,
    pub y_lower: f64,
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
}

/// A 2-D heat map: mean response per `(x bin, y bin)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatMap {
    pub x_variable: String,
    pub y_variable: String,
    pub x_binning: Binning,
    pub y_binning: Binning,
    pub cells: Vec<Cell>,
}

pub fn bin_samples_2d(
    (x_variable, x_binning): (&str, Binning),
    (y_variable, y_binning): (&str, Binning),
    samples: impl IntoIterator<Item = (f64, f64, f64)>,
) -> Result<HeatMap, CentralityError> {
    let mut groups: BTreeMap<(i64, i64), SampleSet> = BTreeMap::new();
    for (x, y, z) in samples {
        groups.entry((x_binning.index(x), y_binning.index(y))).or_default().push(z);
    }
    if groups.is_empty() {
        return Err(CentralityError::EmptySample);
    }
    let cells = groups
        .into_iter()
        .map(|((xi, yi), set)| {
            let (mean, std_error) = set.mean_se();
            Cell {
                x_index: xi,
                y_index: yi,
                x_lower: x_binning.bounds(xi).0,
                y_lower: y_binning.bounds(yi).0,
                mean,
                std_error,
                count: set.len(),
            }
        })
        .collect();
    Ok(HeatMap { x_variable: x_variable.to_string(), y_variable: y_variable.to_string(), x_binning, y_binning, cells })
}

/// Tables keyed on the seed bank of each cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedTables {
    /// Mean cascade size by (in-degree, out-degree) of the seed.
    pub degree_map: HeatMap,
    /// Mean cascade size by (in-degree, log10 shock size) of the seed.
    pub shock_map: HeatMap,
    /// Mean cascade size by seed core number, with standard errors.
    pub by_core: BinnedStatistic,
    /// Mean cascade size by seed in-degree.
    pub by_in_degree: BinnedStatistic,
    /// Mean cascade size by log10 shock size.
    pub by_shock: BinnedStatistic,
}

/// One simulated seed: its structure, the shock it caused and the cascade size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedSample {
    pub in_degree: usize,
    pub out_degree: usize,
    pub core_number: usize,
    pub shock: f64,
    pub size: f64,
}

/// Builds every seed-keyed table from `(seed profile, result)` pairs.
pub fn bin_cascades(
    results: &[(CentralityProfile, CascadeResult)],
    measure: Measure,
) -> Result<SeedTables, CentralityError> {
    let samples: Vec<SeedSample> = results
        .iter()
        .map(|(p, r)| SeedSample {
            in_degree: p.in_degree,
            out_degree: p.out_degree,
            core_number: p.core_number,
            shock: r.initial_shock,
            size: r.size(measure),
        })
        .collect();
    bin_seed_samples(&samples)
}

pub fn bin_seed_samples(samples: &[SeedSample]) -> Result<SeedTables, CentralityError> {
    if samples.is_empty() {
        return Err(CentralityError::EmptySample);
    }
    Ok(SeedTables {
        degree_map: bin_samples_2d(
            ("in_degree", Binning::UNIT),
            ("out_degree", Binning::UNIT),
            samples.iter().map(|s| (s.in_degree as f64, s.out_degree as f64, s.size)),
        )?,
        shock_map: bin_samples_2d(
            ("in_degree", Binning::UNIT),
            ("shock", Binning::SHOCK),
            samples.iter().map(|s| (s.in_degree as f64, s.shock, s.size)),
        )?,
        by_core: bin_samples("core_number", Binning::UNIT, samples.iter().map(|s| (s.core_number as f64, s.size)))?,
        by_in_degree: bin_samples("in_degree", Binning::UNIT, samples.iter().map(|s| (s.in_degree as f64, s.size)))?,
        by_shock: bin_samples("shock", Binning::SHOCK, samples.iter().map(|s| (s.shock, s.size)))?,
    })
}

/// Counts of (exposures, defaults) per bin; exact and order-independent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbabilityCounts {
    pub bins: BTreeMap<i64, (u64, u64)>,
}

impl ProbabilityCounts {
    pub fn record(&mut self, index: i64, defaulted: bool) {
        let slot = self.bins.entry(index).or_insert((0, 0));
        slot.0 += 1;
        slot.1 += u64::from(defaulted);
    }

    pub fn merge(&mut self, other: &ProbabilityCounts) {
        for (&k, &(n, d)) in &other.bins {
            let slot = self.bins.entry(k).or_insert((0, 0));
            slot.0 += n;
            slot.1 += d;
        }
    }

    /// One bin per populated index: mean is the default frequency, standard
    /// error the binomial one.
    pub fn finish(&self, variable: &str, binning: Binning) -> BinnedStatistic {
        let bins = self
            .bins
            .iter()
            .map(|(&index, &(n, d))| {
                let p = d as f64 / n as f64;
                let (lower, upper) = binning.bounds(index);
                Bin { index, lower, upper, mean: p, std_error: (p * (1.0 - p) / n as f64).sqrt(), count: n as usize }
            })
            .collect();
        BinnedStatistic { variable: variable.to_string(), binning, bins }
    }
}

/// Conditional default probability of non-seed banks by their own in-degree,
/// out-degree, closeness and core number.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VictimCounts {
    pub in_degree: ProbabilityCounts,
    pub out_degree: ProbabilityCounts,
    pub closeness: ProbabilityCounts,
    pub core_number: ProbabilityCounts,
}

impl VictimCounts {
    /// Records every non-seed node of one cascade. `profiles` must be
    /// index-aligned with the network the cascade ran on; `defaulted[i]`
    /// says whether node `i` defaulted.
    pub fn record(&mut self, profiles: &[CentralityProfile], seed: BankId, defaulted: &[bool]) {
        for (p, &hit) in profiles.iter().zip(defaulted) {
            if p.bank == seed {
                continue;
            }
            self.in_degree.record(Binning::UNIT.index(p.in_degree as f64), hit);
            self.out_degree.record(Binning::UNIT.index(p.out_degree as f64), hit);
            self.closeness.record(Binning::CLOSENESS.index(p.closeness), hit);
            self.core_number.record(Binning::UNIT.index(p.core_number as f64), hit);
        }
    }

    pub fn merge(&mut self, other: &VictimCounts) {
        self.in_degree.merge(&other.in_degree);
        self.out_degree.merge(&other.out_degree);
        self.closeness.merge(&other.closeness);
        self.core_number.merge(&other.core_number);
    }

    pub fn curves(&self) -> Vec<BinnedStatistic> {
        vec![
            self.in_degree.finish("in_degree", Binning::UNIT),
            self.out_degree.finish("out_degree", Binning::UNIT),
            self.closeness.finish("closeness", Binning::CLOSENESS),
            self.core_number.finish("core_number", Binning::UNIT),
        ]
    }
}
