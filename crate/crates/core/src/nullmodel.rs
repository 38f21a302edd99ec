//! Randomised reference networks.
//!
//! | kind                | preserved                                   |
//! |---------------------|---------------------------------------------|
//! | `Empirical`         | everything (identity)                       |
//! | `Rewired`           | node set, per-node in/out degree, weights   |
//! | `Random`            | node set, edge count, weight multiset       |
//! | `FixedWeight`       | node set, topology, total lending           |
//! | `RandomFixedWeight` | node set, edge count, total lending         |
//!
//! All outputs stay netted: no self-loops, no duplicate and no reciprocal
//! pairs. Randomised kinds may leave some banks without links; such banks
//! stay in the node set and hold a dormant balance sheet.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::{sheets_for_network, BalanceError, BalanceSheet, Params, SheetPolicy};
use crate::money::Money;
use crate::network::{DailyNetwork, Degree, NetworkError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullModelKind {
    Empirical,
    Rewired,
    Random,
    FixedWeight,
    RandomFixedWeight,
}

impl NullModelKind {
    pub const ALL: [NullModelKind; 5] = [
        NullModelKind::Empirical,
        NullModelKind::Rewired,
        NullModelKind::Random,
        NullModelKind::FixedWeight,
        NullModelKind::RandomFixedWeight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NullModelKind::Empirical => "empirical",
            NullModelKind::Rewired => "rewired",
            NullModelKind::Random => "random",
            NullModelKind::FixedWeight => "fixed-weight",
            NullModelKind::RandomFixedWeight => "random-fixed-weight",
        }
    }

    /// Stable integer used in seed derivation.
    pub fn code(self) -> u64 {
        match self {
            NullModelKind::Empirical => 0,
            NullModelKind::Rewired => 1,
            NullModelKind::Random => 2,
            NullModelKind::FixedWeight => 3,
            NullModelKind::RandomFixedWeight => 4,
        }
    }

    /// Whether replicates differ from each other.
    pub fn is_stochastic(self) -> bool {
        !matches!(self, NullModelKind::Empirical | NullModelKind::FixedWeight)
    }
}

impl fmt::Display for NullModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NullModelKind {
    type Err = NullModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        NullModelKind::ALL
            .into_iter()
            .find(|k| k.name() == key || (key == "fixed" && *k == NullModelKind::FixedWeight))
            .ok_or_else(|| NullModelError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NullModelError {
    #[error("unknown null model {0:?}")]
    UnknownKind(String),
    #[error("{kind} needs at least {needed} edges, network has {found}")]
    TooFewEdges { kind: NullModelKind, needed: usize, found: usize },
    #[error("{kind} needs at least 2 nodes")]
    TooFewNodes { kind: NullModelKind },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error("{kind} violated its contract: {what}")]
    Contract { kind: NullModelKind, what: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewireConfig {
    /// Largest relative weight difference `|w1 − w2| / max(w1, w2)` of two
    /// edges that may swap partners.
    pub weight_tolerance: f64,
    pub swaps_per_edge: usize,
    /// Attempt budget as a multiple of the target swap count.
    pub max_attempts_factor: usize,
    pub seed: u64,
}

impl Default for RewireConfig {
    fn default() -> Self {
        RewireConfig { weight_tolerance: 0.10, swaps_per_edge: 10, max_attempts_factor: 100, seed: 0 }
    }
}

/// Outcome of a rewiring run. `achieved < target` signals a partial rewire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewireReport {
    pub target: usize,
    pub achieved: usize,
    pub attempts: usize,
    pub final_tolerance: f64,
}

impl RewireReport {
    pub fn is_partial(&self) -> bool {
        self.achieved < self.target
    }
}

/// Attempts between checks of the qualifying-pair rate.
const RELAX_WINDOW: usize = 1_000;

/// Degree- and weight-preserving double-edge swapper.
pub struct Rewirer<'a> {
    net: &'a DailyNetwork,
    edges: Vec<(usize, usize, Money)>,
    present: HashSet<(usize, usize)>,
    // Edge ids ordered by weight; positions never change because swaps keep
    // each weight on its edge slot.
    by_weight: Vec<usize>,
    tolerance: f64,
    rng: ChaCha8Rng,
    attempts: usize,
    achieved: usize,
    window_attempts: usize,
    window_qualified: usize,
}

impl<'a> Rewirer<'a> {
    pub fn new(net: &'a DailyNetwork, cfg: &RewireConfig) -> Self {
        let edges: Vec<_> = (0..net.edge_count())
            .map(|e| {
                let (l, b) = net.endpoints(e);
                (l, b, net.edges()[e].weight)
            })
            .collect();
        let present = edges.iter().map(|&(l, b, _)| (l, b)).collect();
        let mut by_weight: Vec<usize> = (0..edges.len()).collect();
        by_weight.sort_by_key(|&e| (edges[e].2, e));
        Rewirer {
            net,
            edges,
            present,
            by_weight,
            tolerance: cfg.weight_tolerance,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            attempts: 0,
            achieved: 0,
            window_attempts: 0,
            window_qualified: 0,
        }
    }

    fn similar(tol: f64, w1: Money, w2: Money) -> bool {
        let (a, b) = (w1.units() as f64, w2.units() as f64);
        (a - b).abs() / a.max(b) <= tol
    }

    /// Picks a partner edge of similar weight for `e1`, if any exists.
    fn partner(&mut self, e1: usize) -> Option<usize> {
        let w1 = self.edges[e1].2;
        let tol = self.tolerance;
        let weight = |pos: usize| self.edges[self.by_weight[pos]].2;
        let n = self.by_weight.len();
        let lo = partition(n, |p| weight(p) < w1 && !Self::similar(tol, w1, weight(p)));
        let hi = partition(n, |p| weight(p) <= w1 || Self::similar(tol, w1, weight(p)));
        if hi - lo < 2 {
            return None;
        }
        loop {
            let e2 = self.by_weight[self.rng.random_range(lo..hi)];
            if e2 != e1 {
                return Some(e2);
            }
        }
    }

    /// One swap attempt; true if the swap was applied.
    pub fn try_swap(&mut self) -> bool {
        self.attempts += 1;
        self.window_attempts += 1;
        if self.window_attempts == RELAX_WINDOW {
            if self.window_qualified * 100 < self.window_attempts {
                self.tolerance = if self.tolerance > 0.0 { self.tolerance * 2.0 } else { 0.01 };
            }
            self.window_attempts = 0;
            self.window_qualified = 0;
        }
        let e1 = self.rng.random_range(0..self.edges.len());
        let Some(e2) = self.partner(e1) else {
            return false;
        };
        self.window_qualified += 1;
        let (a, b, w1) = self.edges[e1];
        let (c, d, w2) = self.edges[e2];
        if a == c || a == d || b == c || b == d {
            return false;
        }
        let taken = |x: usize, y: usize| self.present.contains(&(x, y)) || self.present.contains(&(y, x));
        if taken(a, d) || taken(c, b) {
            return false;
        }
        self.present.remove(&(a, b));
        self.present.remove(&(c, d));
        self.present.insert((a, d));
        self.present.insert((c, b));
        self.edges[e1] = (a, d, w1);
        self.edges[e2] = (c, b, w2);
        self.achieved += 1;
        true
    }

    /// Attempts swaps until `target` succeed or `max_attempts` are spent.
    pub fn run(&mut self, target: usize, max_attempts: usize) {
        let goal = self.achieved + target;
        while self.achieved < goal && self.attempts < max_attempts {
            self.try_swap();
        }
    }

    pub fn achieved(&self) -> usize {
        self.achieved
    }

    pub fn finish(self) -> Result<(DailyNetwork, usize, usize, f64), NullModelError> {
        let net = self.net.with_index_edges(self.edges)?;
        Ok((net, self.achieved, self.attempts, self.tolerance))
    }
}

fn partition(n: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Degree-preserving rewiring of edges with similar weights.
pub fn rewire(net: &DailyNetwork, cfg: &RewireConfig) -> Result<(DailyNetwork, RewireReport), NullModelError> {
    if net.edge_count() < 2 {
        return Err(NullModelError::TooFewEdges { kind: NullModelKind::Rewired, needed: 2, found: net.edge_count() });
    }
    let target = cfg.swaps_per_edge.max(1) * net.edge_count();
    let max_attempts = cfg.max_attempts_factor.max(1) * target;
    let mut rw = Rewirer::new(net, cfg);
    rw.run(target, max_attempts);
    let (out, achieved, attempts, final_tolerance) = rw.finish()?;
    Ok((out, RewireReport { target, achieved, attempts, final_tolerance }))
}

/// Places the day's weights on uniformly random node pairs.
pub fn randomize(net: &DailyNetwork, seed: u64) -> Result<DailyNetwork, NullModelError> {
    let n = net.node_count();
    let m = net.edge_count();
    if n < 2 {
        return Err(NullModelError::TooFewNodes { kind: NullModelKind::Random });
    }
    let pairs_available = n * (n - 1) / 2;
    debug_assert!(m <= pairs_available);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<Money> = net.edges().iter().map(|e| e.weight).collect();
    let mut out = Vec::with_capacity(m);
    if 4 * m > pairs_available {
        // Dense: shuffle all unordered pairs and orient at random.
        let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        pairs.shuffle(&mut rng);
        for (&(i, j), &w) in pairs.iter().zip(&weights) {
            if rng.random::<bool>() {
                out.push((i, j, w));
            } else {
                out.push((j, i, w));
            }
        }
    } else {
        let mut used: HashSet<(usize, usize)> = HashSet::with_capacity(m);
        for &w in &weights {
            loop {
                let u = rng.random_range(0..n);
                let v = rng.random_range(0..n);
                if u != v && used.insert((u.min(v), u.max(v))) {
                    out.push((u, v, w));
                    break;
                }
            }
        }
    }
    Ok(net.with_index_edges(out)?)
}

/// Same topology with every weight replaced by the day's mean weight. The
/// total is split in integer units, so weights differ by at most one unit
/// and total lending is preserved exactly.
pub fn fix_weights(net: &DailyNetwork) -> Result<DailyNetwork, NullModelError> {
    let m = net.edge_count();
    if m == 0 {
        return Err(NullModelError::TooFewEdges { kind: NullModelKind::FixedWeight, needed: 1, found: 0 });
    }
    let total = net.total_lending().units();
    let (q, r) = (total / m as i64, (total % m as i64) as usize);
    Ok(net.with_index_edges((0..m).map(|e| {
        let (l, b) = net.endpoints(e);
        (l, b, Money::from_units(q + i64::from(e < r)))
    }))?)
}

pub fn randomize_fixed(net: &DailyNetwork, seed: u64) -> Result<DailyNetwork, NullModelError> {
    randomize(&fix_weights(net)?, seed)
}

/// A generated network with whatever diagnostics its generator reports.
#[derive(Debug, Clone)]
pub struct NullNetwork {
    pub kind: NullModelKind,
    pub network: DailyNetwork,
    pub rewire: Option<RewireReport>,
}

/// Generates one network of `kind` from `net`.
///
/// Days too small for a kind (fewer than two edges for rewiring, fewer than
/// two nodes for randomisation) yield the input unchanged.
pub fn generate(kind: NullModelKind, net: &DailyNetwork, cfg: &RewireConfig) -> Result<NullNetwork, NullModelError> {
    let (network, rewire) = match kind {
        NullModelKind::Empirical => (net.clone(), None),
        NullModelKind::Rewired if net.edge_count() < 2 => (net.clone(), None),
        NullModelKind::Rewired => {
            let (n, r) = rewire(net, cfg)?;
            (n, Some(r))
        }
        _ if net.edge_count() == 0 => (net.clone(), None),
        NullModelKind::Random => (randomize(net, cfg.seed)?, None),
        NullModelKind::FixedWeight => (fix_weights(net)?, None),
        NullModelKind::RandomFixedWeight => (randomize_fixed(net, cfg.seed)?, None),
    };
    check_contract(kind, net, &network)?;
    Ok(NullNetwork { kind, network, rewire })
}

fn sorted_weights(net: &DailyNetwork) -> Vec<Money> {
    let mut w: Vec<Money> = net.edges().iter().map(|e| e.weight).collect();
    w.sort_unstable();
    w
}

fn degree_map(net: &DailyNetwork) -> BTreeMap<crate::network::BankId, Degree> {
    net.degrees()
}

/// Verifies the preserved-quantity contract of `kind` between an input
/// network and a generated one.
pub fn check_contract(
    kind: NullModelKind,
    original: &DailyNetwork,
    generated: &DailyNetwork,
) -> Result<(), NullModelError> {
    let fail = |what: &str| Err(NullModelError::Contract { kind, what: what.to_string() });
    if original.nodes() != generated.nodes() {
        return fail("node set changed");
    }
    let topology = |n: &DailyNetwork| n.edges().iter().map(|e| (e.lender, e.borrower)).collect::<Vec<_>>();
    match kind {
        NullModelKind::Empirical => {
            if original != generated {
                return fail("network changed");
            }
        }
        NullModelKind::Rewired => {
            if degree_map(original) != degree_map(generated) {
                return fail("degree sequence changed");
            }
            if sorted_weights(original) != sorted_weights(generated) {
                return fail("weight multiset changed");
            }
        }
        NullModelKind::Random => {
            if original.edge_count() != generated.edge_count() {
                return fail("edge count changed");
            }
            if sorted_weights(original) != sorted_weights(generated) {
                return fail("weight multiset changed");
            }
        }
        NullModelKind::FixedWeight => {
            if topology(original) != topology(generated) {
                return fail("topology changed");
            }
            if original.total_lending() != generated.total_lending() {
                return fail("total lending changed");
            }
            let w = sorted_weights(generated);
            if let (Some(lo), Some(hi)) = (w.first(), w.last()) {
                if hi.units() - lo.units() > 1 {
                    return fail("weights are not uniform");
                }
            }
        }
        NullModelKind::RandomFixedWeight => {
            if original.edge_count() != generated.edge_count() {
                return fail("edge count changed");
            }
            if original.total_lending() != generated.total_lending() {
                return fail("total lending changed");
            }
        }
    }
    Ok(())
}

/// Balance sheets for a generated network.
///
/// `Empirical` and `Rewired` keep each bank's historical mean volume
/// `baseline_tv(i)`; the other kinds size banks by their own same-day
/// `L + B` in the generated network.
pub fn rebuild_sheets<F>(
    kind: NullModelKind,
    null_net: &DailyNetwork,
    baseline_tv: F,
    params: Params,
    policy: SheetPolicy,
) -> Result<Vec<BalanceSheet>, NullModelError>
where
    F: FnMut(usize) -> f64,
{
    let sheets = match kind {
        NullModelKind::Empirical | NullModelKind::Rewired => sheets_for_network(null_net, baseline_tv, params, policy)?,
        _ => sheets_for_network(
            null_net,
            |i| (null_net.lending(i) + null_net.borrowing(i)).to_millions(),
            params,
            policy,
        )?,
    };
    Ok(sheets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{net_edges, BankId};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn day() -> NaiveDate {
        NaiveDate::from_ymd_opt(2011, 9, 1).unwrap()
    }

    fn network(edges: &[(u32, u32, i64)]) -> DailyNetwork {
        let gross: Vec<_> = edges.iter().map(|&(l, b, w)| (BankId(l), BankId(b), Money::from_whole(w))).collect();
        net_edges(day(), &gross).unwrap()
    }

    fn cfg(seed: u64) -> RewireConfig {
        RewireConfig { seed, ..RewireConfig::default() }
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in NullModelKind::ALL {
            assert_eq!(k.name().parse::<NullModelKind>().unwrap(), k);
        }
        assert_eq!("Fixed_Weight".parse::<NullModelKind>().unwrap(), NullModelKind::FixedWeight);
        assert!("erdos".parse::<NullModelKind>().is_err());
    }

    #[test]
    fn only_legal_swap_of_two_disjoint_edges() {
        let net = network(&[(1, 2, 5), (3, 4, 5)]);
        let mut rw = Rewirer::new(&net, &cfg(7));
        rw.run(1, 1_000);
        assert_eq!(rw.achieved(), 1);
        let (out, ..) = rw.finish().unwrap();
        let pairs: Vec<_> = out.edges().iter().map(|e| (e.lender.0, e.borrower.0)).collect();
        assert_eq!(pairs, vec![(1, 4), (3, 2)]);
    }

    #[test]
    fn fully_constrained_network_is_unchanged_with_warning() {
        // Both edges share lender 1, so every swap collides.
        let net = network(&[(1, 2, 5), (1, 3, 5)]);
        let (out, report) = rewire(&net, &cfg(3)).unwrap();
        assert_eq!(out, net);
        assert!(report.is_partial());
        assert_eq!(report.achieved, 0);
        assert_eq!(report.attempts, 100 * report.target);
    }

    #[test]
    fn rewiring_respects_weight_similarity() {
        // Weights 1 and 100 never qualify at 10% tolerance in the first window.
        let net = network(&[(1, 2, 1), (3, 4, 100)]);
        let mut rw = Rewirer::new(&net, &cfg(1));
        rw.run(1, RELAX_WINDOW - 1);
        assert_eq!(rw.achieved(), 0);
        // After enough unqualified windows the tolerance relaxes and swaps happen.
        rw.run(1, 20 * RELAX_WINDOW);
        assert_eq!(rw.achieved(), 1);
        let (_, _, _, tol) = rw.finish().unwrap();
        assert!(tol >= 0.99);
    }

    #[test]
    fn too_few_edges() {
        let net = network(&[(1, 2, 5)]);
        assert!(matches!(rewire(&net, &cfg(0)), Err(NullModelError::TooFewEdges { .. })));
        // `generate` passes such days through unchanged.
        let g = generate(NullModelKind::Rewired, &net, &cfg(0)).unwrap();
        assert_eq!(g.network, net);
    }

    #[test]
    fn single_edge_randomize() {
        let net = network(&[(1, 2, 5)]);
        let mut seen = HashSet::new();
        for seed in 0..200 {
            let out = randomize(&net, seed).unwrap();
            assert_eq!(out.edge_count(), 1);
            assert_eq!(out.edges()[0].weight, Money::from_whole(5));
            seen.insert((out.edges()[0].lender, out.edges()[0].borrower));
        }
        // Both orientations of the only pair occur.
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn fixed_weight_mean() {
        let net = network(&[(1, 2, 2), (2, 3, 4), (3, 4, 6)]);
        let out = fix_weights(&net).unwrap();
        assert!(out.edges().iter().all(|e| e.weight == Money::from_whole(4)));
        assert_eq!(out.degree_vec(), net.degree_vec());
        let uniform = network(&[(1, 2, 3), (4, 2, 3)]);
        assert_eq!(fix_weights(&uniform).unwrap(), uniform);
    }

    #[test]
    fn fixed_weight_remainder_is_spread_exactly() {
        let net = net_edges(
            day(),
            &[
                (BankId(1), BankId(2), Money::from_units(10)),
                (BankId(2), BankId(3), Money::from_units(10)),
                (BankId(3), BankId(4), Money::from_units(12)),
            ],
        )
        .unwrap();
        let out = fix_weights(&net).unwrap();
        let w: Vec<i64> = out.edges().iter().map(|e| e.weight.units()).collect();
        assert_eq!(w, vec![11, 11, 10]);
        check_contract(NullModelKind::FixedWeight, &net, &out).unwrap();
    }

    #[test]
    fn fixed_weight_sheets_scale_with_degree() {
        let net = network(&[(1, 2, 2), (1, 3, 4), (1, 4, 6), (5, 1, 8), (2, 3, 5)]);
        let fw = fix_weights(&net).unwrap();
        let p = Params::default();
        let sheets =
            rebuild_sheets(NullModelKind::FixedWeight, &fw, |_| unreachable!(), p, SheetPolicy::Clamp).unwrap();
        let w = 5.0; // 25 / 5
        let i = fw.index_of(BankId(1)).unwrap();
        assert_eq!(sheets[i].total_assets, 4.0 * w / (2.0 * p.theta));
    }

    #[test]
    fn hub_structure_is_destroyed_by_randomisation() {
        // Hub 0 lends to 30 banks; the chain 1-…-30 keeps everyone linked.
        let mut edges: Vec<(u32, u32, i64)> = (1..=30).map(|k| (0, k, 1)).collect();
        edges.extend((1..30).map(|k| (k, k + 1, 1)));
        let net = network(&edges);
        let n = net.node_count() as f64;
        let m = net.edge_count() as f64;
        let p = m / (n * (n - 1.0) / 2.0);
        let mut hub_degree = 0.0;
        let mut max_degree = 0.0;
        let reps = 1000;
        for seed in 0..reps {
            let out = randomize(&net, seed).unwrap();
            let degs = out.degree_vec();
            hub_degree += degs[0].total() as f64;
            max_degree += degs.iter().map(|d| d.total()).max().unwrap() as f64;
        }
        hub_degree /= reps as f64;
        max_degree /= reps as f64;
        // Binomial(n − 1, p) expectation for the former hub.
        let expected = (n - 1.0) * p;
        assert!((hub_degree - expected).abs() < 0.15 * expected, "{hub_degree} vs {expected}");
        assert!(max_degree < 15.0);
    }

    #[test]
    fn empirical_sheets_match_baseline() {
        let net = network(&[(1, 2, 2), (2, 3, 4)]);
        let p = Params::default();
        let tv = |i: usize| 10.0 + i as f64;
        let base = sheets_for_network(&net, tv, p, SheetPolicy::Clamp).unwrap();
        let g = generate(NullModelKind::Empirical, &net, &cfg(0)).unwrap();
        assert_eq!(rebuild_sheets(NullModelKind::Empirical, &g.network, tv, p, SheetPolicy::Clamp).unwrap(), base);
    }

    fn arb_network() -> impl Strategy<Value = DailyNetwork> {
        prop::collection::vec((0u32..25, 0u32..25, 1i64..6), 2..80).prop_filter_map("degenerate", |v| {
            let gross: Vec<_> = v
                .into_iter()
                .filter(|(a, b, _)| a != b)
                .map(|(a, b, w)| (BankId(a), BankId(b), Money::from_whole(w)))
                .collect();
            let net = net_edges(day(), &gross).ok()?;
            (net.edge_count() >= 2).then_some(net)
        })
    }

    proptest! {
        #[test]
        fn every_kind_keeps_its_contract(net in arb_network(), seed in any::<u64>()) {
            for kind in NullModelKind::ALL {
                let g = generate(kind, &net, &cfg(seed)).unwrap();
                // No self-loops / duplicates / reciprocals: re-validate.
                let again = DailyNetwork::new(day(), g.network.nodes().to_vec(), g.network.edges().to_vec());
                prop_assert!(again.is_ok());
                check_contract(kind, &net, &g.network).unwrap();
                // Reproducible.
                let h = generate(kind, &net, &cfg(seed)).unwrap();
                prop_assert_eq!(&g.network, &h.network);
            }
        }

        #[test]
        fn rewired_total_assets_match(net in arb_network(), seed in any::<u64>()) {
            let p = Params::default();
            let tv = |i: usize| (net.lending(i) + net.borrowing(i)).to_millions() * 1.5;
            let base = sheets_for_network(&net, tv, p, SheetPolicy::Clamp).unwrap();
            let g = generate(NullModelKind::Rewired, &net, &cfg(seed)).unwrap();
            let re = rebuild_sheets(NullModelKind::Rewired, &g.network, tv, p, SheetPolicy::Clamp).unwrap();
            let a: f64 = base.iter().map(|s| s.total_assets).sum();
            let b: f64 = re.iter().map(|s| s.total_assets).sum();
            prop_assert!((a - b).abs() <= 0.01 * a);
        }
    }
}
