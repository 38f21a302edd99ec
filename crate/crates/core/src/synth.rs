//! Synthetic overnight-market transaction data.
//!
//! A persistent pool of banks carries a heavy-tailed latent size and a
//! lender/borrower bias. Each trading day a size-weighted subset is active,
//! links attach by size-proportional fitness, and loan amounts scale with
//! the geometric mean of the counterpart sizes. The day's netted volume is
//! rescaled to a drawn target, so the preset moments are met by
//! construction.

use std::collections::HashSet;

use chrono::{Datelike, NaiveDate, NaiveTime, Weekday};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{build_daily_networks, Aggressor, IngestError, LoanTransaction};
use crate::money::Money;
use crate::network::BankId;
use crate::seeding::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketPreset {
    pub name: String,
    pub n_banks_mean: f64,
    pub n_banks_sd: f64,
    /// Inclusive clip range of the daily active-bank count.
    pub n_banks_min: usize,
    pub n_banks_max: usize,
    pub n_links_mean: f64,
    pub n_links_sd: f64,
    pub mean_degree: f64,
    pub daily_volume_mean: f64,
    pub daily_volume_sd: f64,
    pub n_days: usize,
    pub size_tail_exponent: f64,
    pub first_day: NaiveDate,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("unknown preset {0:?}; expected 2006-like or 2011-like")]
    UnknownPreset(String),
    #[error("invalid preset: {0}")]
    Invalid(String),
}

impl MarketPreset {
    pub const NAMES: [&'static str; 2] = ["2006-like", "2011-like"];

    pub fn like_2006() -> Self {
        MarketPreset {
            name: "2006-like".into(),
            n_banks_mean: 128.0,
            n_banks_sd: 9.0,
            n_banks_min: 77,
            n_banks_max: 144,
            n_links_mean: 355.0,
            n_links_sd: 48.0,
            mean_degree: 5.5,
            daily_volume_mean: 20_953.0,
            daily_volume_sd: 4_240.0,
            n_days: 257,
            size_tail_exponent: 2.3,
            first_day: NaiveDate::from_ymd_opt(2006, 1, 2).expect("valid date"),
            seed: 2006,
        }
    }

    pub fn like_2011() -> Self {
        MarketPreset {
            name: "2011-like".into(),
            n_banks_mean: 70.0,
            n_banks_sd: 8.0,
            n_banks_min: 38,
            n_banks_max: 89,
            n_links_mean: 161.0,
            n_links_sd: 29.0,
            mean_degree: 4.5,
            daily_volume_mean: 4_261.0,
            daily_volume_sd: 1_001.0,
            n_days: 257,
            size_tail_exponent: 2.3,
            first_day: NaiveDate::from_ymd_opt(2011, 1, 3).expect("valid date"),
            seed: 2011,
        }
    }

    pub fn by_name(name: &str) -> Result<Self, SynthError> {
        match name.trim().to_ascii_lowercase().as_str() {
            "2006-like" | "2006" => Ok(Self::like_2006()),
            "2011-like" | "2011" => Ok(Self::like_2011()),
            _ => Err(SynthError::UnknownPreset(name.to_string())),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Invalid(m.to_string()));
        if self.n_days == 0 {
            return bad("n_days must be positive");
        }
        if !(self.n_banks_min >= 2 && self.n_banks_min <= self.n_banks_max) {
            return bad("bank count range must satisfy 2 <= min <= max");
        }
        let max_links = self.n_banks_max * (self.n_banks_max - 1) / 2;
        if self.n_links_mean > max_links as f64 {
            return bad("more links than node pairs");
        }
        if self.n_links_mean < 1.0 || self.daily_volume_mean <= 0.0 {
            return bad("link count and volume must be positive");
        }
        if self.n_banks_sd < 0.0 || self.n_links_sd < 0.0 || self.daily_volume_sd < 0.0 {
            return bad("standard deviations must be non-negative");
        }
        if self.size_tail_exponent <= 1.0 {
            return bad("size tail exponent must exceed 1");
        }
        Ok(())
    }

    fn pool_size(&self) -> usize {
        self.n_banks_max.max((1.3 * self.n_banks_mean).ceil() as usize)
    }
}

/// Latent sizes are truncated Pareto on `[1, SIZE_CUTOFF]`.
const SIZE_CUTOFF: f64 = 1_000.0;
/// Exponent applied to latent size in the daily activity draw.
const ACTIVITY_EXPONENT: f64 = 0.6;
/// Exponent applied to latent size in link attachment.
const FITNESS_EXPONENT: f64 = 0.7;
/// Exponent of the geometric-mean size factor in loan amounts.
const AMOUNT_EXPONENT: f64 = 0.5;
const AMOUNT_NOISE_SIGMA: f64 = 1.0;
/// Share of links that also carry a smaller trade in the opposite direction.
const REVERSE_TRADE_SHARE: f64 = 0.3;
/// Redraws allowed when a spanning link pairs two same-side banks.
const MATCH_RETRIES: usize = 4;
/// Share of lenders among the largest quarter of banks and among the rest.
/// Large banks act as liquidity hubs.
const LENDER_SHARE_LARGE: f64 = 0.8;
const LENDER_SHARE_SMALL: f64 = 0.4;
/// Range of `|lend_bias − 0.5|`.
const LEAN: (f64, f64) = (0.35, 0.48);

#[derive(Debug, Clone)]
struct Bank {
    id: BankId,
    size: f64,
    /// Probability of taking the lending side of a trade against a neutral bank.
    lend_bias: f64,
}

/// Probability that two banks pair up as one lender and one borrower.
fn side_match(u: &Bank, v: &Bank) -> f64 {
    u.lend_bias * (1.0 - v.lend_bias) + v.lend_bias * (1.0 - u.lend_bias)
}

/// Inverse CDF of a density ∝ s^-exponent on [1, SIZE_CUTOFF].
fn pareto_quantile(u: f64, exponent: f64) -> f64 {
    let a = exponent - 1.0;
    let tail = 1.0 - SIZE_CUTOFF.powf(-a);
    (1.0 - u * tail).powf(-1.0 / a)
}

fn trading_days(first: NaiveDate, n: usize) -> Vec<NaiveDate> {
    first.iter_days().filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)).take(n).collect()
}

fn normal_clipped(rng: &mut ChaCha8Rng, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let x = if sd > 0.0 { Normal::new(mean, sd).expect("finite sd").sample(rng) } else { mean };
    x.clamp(lo, hi)
}

/// Weighted sampling of `k` distinct indices (Efraimidis–Spirakis keys).
fn weighted_subset(rng: &mut ChaCha8Rng, weights: &[f64], k: usize) -> Vec<usize> {
    let mut keys: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            (u.ln() / w, i)
        })
        .collect();
    keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<usize> = keys.into_iter().take(k).map(|(_, i)| i).collect();
    out.sort_unstable();
    out
}

struct Sampler {
    cumulative: Vec<f64>,
}

impl Sampler {
    fn new(weights: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .into_iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Sampler { cumulative }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        self.draw_prefix(rng, self.cumulative.len())
    }

    /// Draws among the first `k` items only.
    fn draw_prefix(&self, rng: &mut ChaCha8Rng, k: usize) -> usize {
        let x = rng.random::<f64>() * self.cumulative[k - 1];
        self.cumulative[..k].partition_point(|&c| c <= x).min(k - 1)
    }
}

/// Generates the gross transaction stream of a synthetic market.
pub fn generate_market(preset: &MarketPreset) -> Result<Vec<LoanTransaction>, SynthError> {
    preset.validate()?;
    let mut rng = rng_for(preset.seed, &[0]);
    let pool_size = preset.pool_size();
    // Stratified quantiles keep the size distribution stable across seeds.
    let mut sizes: Vec<f64> = (0..pool_size)
        .map(|i| pareto_quantile((i as f64 + 0.5) / pool_size as f64, preset.size_tail_exponent))
        .collect();
    sizes.shuffle(&mut rng);
    let mut by_size: Vec<usize> = (0..pool_size).collect();
    by_size.sort_by(|&a, &b| sizes[a].total_cmp(&sizes[b]));
    // Sides follow a low-discrepancy sequence over size ranks, so every
    // size stratum gets its share of lenders.
    let mut lends = vec![false; pool_size];
    let top = (pool_size as f64 * 0.75) as usize;
    for (group, share) in [(&by_size[..top], LENDER_SHARE_SMALL), (&by_size[top..], LENDER_SHARE_LARGE)] {
        let phase: f64 = rng.random();
        for (r, &i) in group.iter().enumerate() {
            lends[i] = ((r + 1) as f64 * share + phase).floor() > (r as f64 * share + phase).floor();
        }
    }
    let pool: Vec<Bank> = (0..pool_size)
        .map(|i| {
            let lean = rng.random_range(LEAN.0..LEAN.1);
            let side = if lends[i] { 1.0 } else { -1.0 };
            Bank { id: BankId(i as u32 + 1), size: sizes[i], lend_bias: 0.5 + side * lean }
        })
        .collect();
    let activity: Vec<f64> = pool.iter().map(|b| b.size.powf(ACTIVITY_EXPONENT)).collect();
    let noise = LogNormal::new(0.0, AMOUNT_NOISE_SIGMA).expect("valid sigma");
    // Link counts track the day's node count; the rest of the variance is noise.
    let link_slope = preset.n_links_mean / preset.n_banks_mean;
    let link_resid_sd = (preset.n_links_sd.powi(2) - (link_slope * preset.n_banks_sd).powi(2)).max(0.0).sqrt();

    let mut txs = Vec::new();
    for (d, date) in trading_days(preset.first_day, preset.n_days).into_iter().enumerate() {
        let mut day_rng = rng_for(preset.seed, &[1, d as u64]);
        let rng = &mut day_rng;
        let n = normal_clipped(
            rng,
            preset.n_banks_mean,
            preset.n_banks_sd,
            preset.n_banks_min as f64,
            preset.n_banks_max as f64,
        )
        .round() as usize;
        let active = weighted_subset(rng, &activity, n);
        let banks: Vec<&Bank> = active.iter().map(|&i| &pool[i]).collect();
        let max_links = n * (n - 1) / 2;
        let links = normal_clipped(rng, link_slope * n as f64, link_resid_sd, (n - 1) as f64, max_links as f64).round()
            as usize;

        let fitness = Sampler::new(banks.iter().map(|b| b.size.powf(FITNESS_EXPONENT)));
        let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(links);
        let mut used: HashSet<(usize, usize)> = HashSet::with_capacity(2 * links);
        // Spanning attachment: banks join in decreasing size, each to an
        // already placed bank chosen by fitness.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| banks[b].size.total_cmp(&banks[a].size));
        let placed = Sampler::new(order.iter().map(|&i| banks[i].size.powf(FITNESS_EXPONENT)));
        for k in 1..n {
            let u = order[k];
            let mut v = order[placed.draw_prefix(rng, k)];
            for _ in 0..MATCH_RETRIES {
                if rng.random::<f64>() < side_match(banks[u], banks[v]) {
                    break;
                }
                v = order[placed.draw_prefix(rng, k)];
            }
            used.insert((u.min(v), u.max(v)));
            pairs.push((u, v));
        }
        let mut budget = 200 * links.max(1);
        while pairs.len() < links && budget > 0 {
            budget -= 1;
            let u = fitness.draw(rng);
            let v = fitness.draw(rng);
            if u != v && rng.random::<f64>() < side_match(banks[u], banks[v]) && used.insert((u.min(v), u.max(v))) {
                pairs.push((u, v));
            }
        }

        let volume = normal_clipped(
            rng,
            preset.daily_volume_mean,
            preset.daily_volume_sd,
            (preset.daily_volume_mean - 3.0 * preset.daily_volume_sd).max(0.05 * preset.daily_volume_mean),
            preset.daily_volume_mean + 3.0 * preset.daily_volume_sd,
        );
        let raw: Vec<f64> = pairs
            .iter()
            .map(|&(u, v)| (banks[u].size * banks[v].size).powf(AMOUNT_EXPONENT) * noise.sample(rng))
            .collect();
        let scale = volume / raw.iter().sum::<f64>();

        for (&(u, v), &r) in pairs.iter().zip(&raw) {
            let (bu, bv) = (banks[u], banks[v]);
            let p_u_lends = bu.lend_bias * (1.0 - bv.lend_bias);
            let p_v_lends = bv.lend_bias * (1.0 - bu.lend_bias);
            let u_lends = rng.random::<f64>() * (p_u_lends + p_v_lends) < p_u_lends;
            let (lender, borrower) = if u_lends { (bu.id, bv.id) } else { (bv.id, bu.id) };
            let net = ticket(r * scale);
            let mut forward = net;
            if rng.random::<f64>() < REVERSE_TRADE_SHARE {
                let back = ticket(net.to_millions() * rng.random_range(0.2..0.8));
                if back < net {
                    txs.push(trade(rng, date, borrower, lender, back));
                    forward += back;
                }
            }
            let pieces = rng.random_range(1..=3usize);
            for piece in split(rng, forward, pieces) {
                txs.push(trade(rng, date, lender, borrower, piece));
            }
        }
    }
    txs.sort_by_key(|t| (t.date, t.time, t.lender, t.borrower));
    Ok(txs)
}

/// Rounds to the thousand-euro grid with a 50k minimum ticket.
fn ticket(millions: f64) -> Money {
    Money::from_units(((millions * 1_000.0).round() as i64).max(50) * 1_000)
}

/// Splits `amount` into up to `pieces` positive parts on the 1k grid.
fn split(rng: &mut ChaCha8Rng, amount: Money, pieces: usize) -> Vec<Money> {
    let grid = amount.units() / 1_000;
    if pieces <= 1 || grid < pieces as i64 {
        return vec![amount];
    }
    let mut cuts: Vec<i64> = (0..pieces - 1).map(|_| rng.random_range(1..grid)).collect();
    cuts.sort_unstable();
    cuts.dedup();
    let mut out = Vec::with_capacity(pieces);
    let mut prev = 0;
    for c in cuts {
        out.push(Money::from_units((c - prev) * 1_000));
        prev = c;
    }
    out.push(amount - Money::from_units(prev * 1_000));
    out
}

fn trade(rng: &mut ChaCha8Rng, date: NaiveDate, lender: BankId, borrower: BankId, amount: Money) -> LoanTransaction {
    let secs = rng.random_range(8 * 3600..18 * 3600);
    LoanTransaction {
        date,
        time: NaiveTime::from_num_seconds_from_midnight_opt(secs, 0).expect("in range"),
        lender,
        borrower,
        amount,
        rate: 0.0,
        aggressor: Aggressor::Unknown,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub statistic: String,
    pub target: f64,
    pub tolerance: f64,
    pub observed: f64,
    pub observed_sd: f64,
    pub pass: bool,
}

/// Compares per-day moments of a dataset with a preset.
///
/// Each statistic passes when its mean over days lies within two preset
/// standard deviations of the preset mean. The degree band is derived from
/// the node and link spreads.
pub fn validate_against_preset(txs: &[LoanTransaction], preset: &MarketPreset) -> Result<Vec<Check>, IngestError> {
    let nets = build_daily_networks(txs)?;
    let mut nodes = Vec::new();
    let mut links = Vec::new();
    let mut degree = Vec::new();
    let mut volume = Vec::new();
    for net in nets.iter().filter(|n| !n.is_empty()) {
        let (n, m) = (net.node_count() as f64, net.edge_count() as f64);
        nodes.push(n);
        links.push(m);
        degree.push(2.0 * m / n);
        volume.push(net.total_lending().to_millions());
    }
    let degree_sd = preset.mean_degree
        * ((preset.n_links_sd / preset.n_links_mean).powi(2) + (preset.n_banks_sd / preset.n_banks_mean).powi(2))
            .sqrt();
    let check = |name: &str, xs: &[f64], target: f64, sd: f64| {
        let (mean, s) = mean_sd(xs);
        let tolerance = 2.0 * sd;
        Check {
            statistic: name.to_string(),
            target,
            tolerance,
            observed: mean,
            observed_sd: s,
            pass: !xs.is_empty() && (mean - target).abs() <= tolerance,
        }
    };
    Ok(vec![
        check("nodes", &nodes, preset.n_banks_mean, preset.n_banks_sd),
        check("links", &links, preset.n_links_mean, preset.n_links_sd),
        check("degree", &degree, preset.mean_degree, degree_sd),
        check("volume", &volume, preset.daily_volume_mean, preset.daily_volume_sd),
    ])
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}
