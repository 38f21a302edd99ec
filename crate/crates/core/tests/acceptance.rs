//! Acceptance suite. Every test checks one criterion and prints a single
//! `[PASS]`/`[FAIL]` line straight to stdout, so the summary is visible even
//! when the harness captures test output.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use interbank_core::balance::sheets_for_network;
use interbank_core::cascade::eligible_seeds;
use interbank_core::centrality::{closeness_all, core_numbers};
use interbank_core::experiment::{simulate, MarketData, RunRecord};
use interbank_core::nullmodel::{generate, RewireConfig};
use interbank_core::synth::generate_market;
use interbank_core::{
    make_balance_sheet, net_edges, run_cascade, run_experiment, BankId, DailyNetwork, ExperimentConfig, InputSource,
    MarketPreset, Measure, Money, NullModelKind, Params, SheetPolicy,
};

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[{tag}] criterion {id}: {name}: {detail}");
    let _ = out.flush();
}

fn day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2011, 6, 1).unwrap()
}

fn graph(edges: &[(u32, u32, i64)]) -> DailyNetwork {
    let gross: Vec<_> = edges.iter().map(|&(l, b, w)| (BankId(l), BankId(b), Money::from_whole(w))).collect();
    net_edges(day(), &gross).unwrap()
}

// ---------------------------------------------------------------------------
// Cascade oracle

/// Outcome compared between engine and oracle.
#[derive(Debug, PartialEq)]
struct Outcome {
    defaulted: Vec<(u32, u32)>,
    rounds: u32,
    lending_loss: f64,
}

/// Synchronous rounds on a dense loan matrix. Every round recomputes each
/// bank's shock and capital from nothing but the loan list and parameters.
fn oracle(edges: &[(u32, u32, i64)], seed: u32, theta: f64, gamma: f64) -> Outcome {
    let mut ids: Vec<u32> = edges.iter().flat_map(|&(l, b, _)| [l, b]).collect();
    ids.sort_unstable();
    ids.dedup();
    let n = ids.len();
    let at = |b: u32| ids.binary_search(&b).unwrap();
    // loan[j][i]: amount j lent to i.
    let mut loan = vec![vec![0i64; n]; n];
    for &(l, b, w) in edges {
        loan[at(l)][at(b)] = w;
    }
    let s = at(seed);
    let lent = |j: usize| loan[j].iter().sum::<i64>() as f64;
    let borrowed = |i: usize| (0..n).map(|j| loan[j][i]).sum::<i64>() as f64;
    let capital = |i: usize| gamma * ((lent(i) + borrowed(i)) / (2.0 * theta));

    let mut loss = vec![vec![0.0f64; n]; n];
    for j in 0..n {
        loss[j][s] = loan[j][s] as f64;
    }
    let mut round_of: Vec<Option<u32>> = vec![None; n];
    round_of[s] = Some(0);
    let mut rounds = 0;
    for _ in 0..10_000_000u64 {
        let shock: Vec<f64> = (0..n).map(|j| (0..n).map(|i| loss[j][i]).sum()).collect();
        let fresh: Vec<usize> = (0..n).filter(|&j| round_of[j].is_none() && shock[j] >= capital(j)).collect();
        if !fresh.is_empty() {
            rounds += 1;
            for &j in &fresh {
                round_of[j] = Some(rounds);
            }
        }
        let mut changed = false;
        for i in (0..n).filter(|&i| i != s && round_of[i].is_some()) {
            let residual = shock[i] - capital(i);
            let b = borrowed(i);
            for j in 0..n {
                if loan[j][i] == 0 {
                    continue;
                }
                let l = loan[j][i] as f64;
                let pass = if residual > b { l } else { (residual * l / b).min(l) };
                if pass != loss[j][i] {
                    loss[j][i] = pass;
                    changed = true;
                }
            }
        }
        if fresh.is_empty() && !changed {
            break;
        }
    }
    let mut defaulted: Vec<(u32, u32)> =
        (0..n).filter(|&i| i != s).filter_map(|i| round_of[i].map(|r| (r, ids[i]))).map(|(r, b)| (b, r)).collect();
    defaulted.sort_by_key(|&(b, r)| (r, b));
    let lending_loss = (0..n).flat_map(|j| (0..n).map(move |i| (j, i))).map(|(j, i)| loss[j][i]).sum();
    Outcome { defaulted, rounds, lending_loss }
}

fn engine(net: &DailyNetwork, seed: u32, theta: f64, gamma: f64) -> Outcome {
    let params = Params { theta, gamma };
    let sheets =
        sheets_for_network(net, |i| (net.lending(i) + net.borrowing(i)).to_millions(), params, SheetPolicy::Strict)
            .unwrap();
    let r = run_cascade(net, &sheets, BankId(seed)).unwrap();
    Outcome {
        defaulted: r.defaulted.iter().map(|&(b, round)| (b.0, round)).collect(),
        rounds: r.rounds,
        lending_loss: r.lending_loss,
    }
}

#[derive(Default)]
struct Tally {
    runs: usize,
    mismatches: usize,
    examples: Vec<String>,
}

/// Compares engine and oracle for every borrower of `edges` and both γ.
fn compare(edges: &[(u32, u32, i64)], tally: &mut Tally) {
    let net = graph(edges);
    for gamma in [0.02, 0.05] {
        for seed in eligible_seeds(&net) {
            let (a, b) = (engine(&net, seed.0, 0.2, gamma), oracle(edges, seed.0, 0.2, gamma));
            if a != b {
                tally.mismatches += 1;
                if tally.examples.len() < 5 {
                    tally.examples.push(format!("{edges:?} seed {} γ {gamma}: {a:?} vs {b:?}", seed.0));
                }
            }
            tally.runs += 1;
        }
    }
}

/// All netted digraphs on `n` labelled nodes without isolated nodes, with
/// weights from {1, 2, 4}.
fn all_graphs(n: u32, mut visit: impl FnMut(&[(u32, u32, i64)])) {
    let pairs: Vec<(u32, u32)> = (1..=n).flat_map(|a| (a + 1..=n).map(move |b| (a, b))).collect();
    let states = 7u64.pow(pairs.len() as u32);
    let mut edges = Vec::with_capacity(pairs.len());
    for code in 0..states {
        edges.clear();
        let mut c = code;
        let mut touched = vec![false; n as usize + 1];
        for &(a, b) in &pairs {
            let s = c % 7;
            c /= 7;
            if s == 0 {
                continue;
            }
            let w = [1, 2, 4][((s - 1) % 3) as usize];
            edges.push(if s <= 3 { (a, b, w) } else { (b, a, w) });
            touched[a as usize] = true;
            touched[b as usize] = true;
        }
        if touched[1..].iter().all(|&t| t) {
            visit(&edges);
        }
    }
}

fn random_graph(rng: &mut ChaCha8Rng, n: u32, weights: &[i64]) -> Vec<(u32, u32, i64)> {
    let p: f64 = rng.random_range(0.2..0.9);
    let mut edges = Vec::new();
    for a in 1..=n {
        for b in a + 1..=n {
            if rng.random::<f64>() < p {
                let w = *weights.choose(rng).unwrap();
                edges.push(if rng.random::<bool>() { (a, b, w) } else { (b, a, w) });
            }
        }
    }
    if edges.is_empty() {
        edges.push((1, 2, weights[0]));
    }
    edges
}

#[test]
fn cascade_matches_naive_oracle() {
    let start = Instant::now();
    let mut tally = Tally::default();
    let mut graphs = 0;
    for n in 2..=4 {
        all_graphs(n, |edges| {
            graphs += 1;
            compare(edges, &mut tally);
        });
    }
    let exhaustive = graphs;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let n = rng.random_range(5..=6);
        compare(&random_graph(&mut rng, n, &[1, 2, 4]), &mut tally);
        graphs += 1;
    }
    let weights: Vec<i64> = (1..=100).collect();
    for _ in 0..10_000 {
        compare(&random_graph(&mut rng, 10, &weights), &mut tally);
        graphs += 1;
    }
    let elapsed = start.elapsed();
    let pass = tally.mismatches == 0 && elapsed < Duration::from_secs(60);
    report(
        1,
        "cascade engine equals naive oracle",
        pass,
        &format!(
            "{graphs} graphs ({exhaustive} exhaustive on <= 4 nodes), {} cascades, {} mismatches, {:.1}s",
            tally.runs,
            tally.mismatches,
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass, "{:#?}", tally.examples);
}

// ---------------------------------------------------------------------------
// Balance sheets

fn market(preset: MarketPreset) -> MarketData {
    MarketData::from_transactions(&generate_market(&preset).unwrap()).unwrap()
}

#[test]
fn balance_identity_and_solvency_forms() {
    let data = market(MarketPreset::like_2011());
    let mut bank_days = 0;
    let mut worst = 0.0f64;
    for net in &data.networks {
        for params in [Params::default(), Params { theta: 0.1, gamma: 0.01 }, Params { theta: 0.5, gamma: 0.10 }] {
            let sheets = sheets_for_network(
                net,
                |i| data.history.rolling_volume(net.bank(i), net.date()).unwrap(),
                params,
                SheetPolicy::Clamp,
            )
            .unwrap();
            for s in &sheets {
                let lhs = s.external_assets + s.lending;
                let rhs = s.capital + s.deposits + s.borrowing;
                worst = worst.max((lhs - rhs).abs() / s.total_assets);
                bank_days += 1;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut disagreements = 0;
    let pairs = 100_000;
    for k in 0..pairs {
        let lending = Money::from_millions(rng.random_range(0.001..5_000.0));
        let borrowing = Money::from_millions(rng.random_range(0.001..5_000.0));
        let tv = rng.random_range(0.1..20_000.0);
        let params = Params { theta: rng.random_range(0.05..0.6), gamma: rng.random_range(0.005..0.2) };
        let s = make_balance_sheet(BankId(k), lending, borrowing, tv, params, SheetPolicy::Clamp).unwrap();
        let loss = rng.random_range(0.0..=s.lending);
        let long_form = (s.lending - loss) + s.external_assets - s.borrowing - s.deposits > 0.0;
        if long_form != s.is_solvent(loss).unwrap() {
            disagreements += 1;
        }
    }
    let pass = worst <= 1e-9 && disagreements == 0;
    report(
        2,
        "balance identity and solvency forms",
        pass,
        &format!(
            "{bank_days} bank-days, max relative residual {worst:.2e}; {disagreements}/{pairs} solvency disagreements"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// Null-model contracts

fn degrees(net: &DailyNetwork) -> BTreeMap<BankId, (usize, usize)> {
    let mut d: BTreeMap<BankId, (usize, usize)> = net.nodes().iter().map(|&b| (b, (0, 0))).collect();
    for e in net.edges() {
        d.get_mut(&e.borrower).unwrap().0 += 1;
        d.get_mut(&e.lender).unwrap().1 += 1;
    }
    d
}

fn weights(net: &DailyNetwork) -> Vec<i64> {
    let mut w: Vec<i64> = net.edges().iter().map(|e| e.weight.units()).collect();
    w.sort_unstable();
    w
}

fn total(net: &DailyNetwork) -> i64 {
    net.edges().iter().map(|e| e.weight.units()).sum()
}

fn contract_holds(kind: NullModelKind, a: &DailyNetwork, b: &DailyNetwork) -> bool {
    let topology = |n: &DailyNetwork| n.edges().iter().map(|e| (e.lender, e.borrower)).collect::<Vec<_>>();
    let netted = b.edges().iter().all(|e| e.lender != e.borrower && e.weight.units() > 0)
        && b.edges().iter().all(|e| !b.edges().iter().any(|f| f.lender == e.borrower && f.borrower == e.lender));
    netted
        && match kind {
            NullModelKind::Empirical => a == b,
            NullModelKind::Rewired => degrees(a) == degrees(b) && weights(a) == weights(b),
            NullModelKind::Random => a.edge_count() == b.edge_count() && weights(a) == weights(b),
            NullModelKind::FixedWeight => topology(a) == topology(b) && total(a) == total(b),
            NullModelKind::RandomFixedWeight => a.edge_count() == b.edge_count() && total(a) == total(b),
        }
}

#[test]
fn null_models_keep_their_contracts() {
    let data = market(MarketPreset::like_2011());
    let per_kind = 1_000;
    let mut violations: BTreeMap<NullModelKind, usize> = BTreeMap::new();
    for kind in NullModelKind::ALL {
        let v = violations.entry(kind).or_default();
        for k in 0..per_kind {
            let net = &data.networks[k % data.networks.len()];
            let cfg = RewireConfig { seed: k as u64 + 1, ..RewireConfig::default() };
            match generate(kind, net, &cfg) {
                Ok(g) if contract_holds(kind, net, &g.network) => {}
                _ => *v += 1,
            }
        }
    }
    let bad: usize = violations.values().sum();
    let detail = violations.iter().map(|(k, v)| format!("{k} {v}")).collect::<Vec<_>>().join(", ");
    report(3, "null-model contracts", bad == 0, &format!("{per_kind} networks per kind; violations: {detail}"));
    assert_eq!(bad, 0);
}

// ---------------------------------------------------------------------------
// Experiment sweeps on the synthetic presets

struct Sweep {
    records: Vec<RunRecord>,
    elapsed: Duration,
}

/// Full sweep on the 2011-like preset: every kind, 20 replicates, γ grid at
/// the baseline θ and θ grid at the baseline γ.
fn sweep_2011() -> &'static Sweep {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let cfg = ExperimentConfig { replicates: 20, ..ExperimentConfig::default() };
        let start = Instant::now();
        let data = MarketData::load(&cfg.input).unwrap();
        let records = simulate(&cfg, &data).unwrap().records;
        Sweep { records, elapsed: start.elapsed() }
    })
}

/// Mean node fraction per (kind, γ, θ).
fn means(records: &[RunRecord], measure: Measure) -> HashMap<(NullModelKind, u64, u64), f64> {
    let mut acc: HashMap<(NullModelKind, u64, u64), (f64, usize)> = HashMap::new();
    for r in records {
        let a = acc.entry((r.kind, r.gamma.to_bits(), r.theta.to_bits())).or_default();
        a.0 += r.size(measure);
        a.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

fn mean_at(m: &HashMap<(NullModelKind, u64, u64), f64>, kind: NullModelKind, gamma: f64, theta: f64) -> f64 {
    m[&(kind, gamma.to_bits(), theta.to_bits())]
}

const GAMMAS: [f64; 7] = [0.01, 0.02, 0.03, 0.04, 0.05, 0.07, 0.10];
const THETAS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

#[test]
fn null_model_ratios_at_baseline() {
    let sweep = sweep_2011();
    let m = means(&sweep.records, Measure::Nodes);
    let e = mean_at(&m, NullModelKind::Empirical, 0.05, 0.2);
    let ratio = |k| mean_at(&m, k, 0.05, 0.2) / e;
    let (rw, ra, fw, rf) = (
        ratio(NullModelKind::Rewired),
        ratio(NullModelKind::Random),
        ratio(NullModelKind::FixedWeight),
        ratio(NullModelKind::RandomFixedWeight),
    );
    let pass = rw <= 1.15
        && 1.0 < ra
        && ra < fw
        && fw < rf
        && (1.1..=2.0).contains(&ra)
        && (1.4..=2.8).contains(&fw)
        && (1.8..=3.5).contains(&rf)
        && sweep.elapsed < Duration::from_secs(600);
    report(
        4,
        "null-model cascade ratios",
        pass,
        &format!(
            "empirical {e:.4}; rewired {rw:.3}, random {ra:.3}, fixed-weight {fw:.3}, random-fixed-weight {rf:.3}; sweep {:.0}s",
            sweep.elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

#[test]
fn capital_and_exposure_sensitivity() {
    let m = means(&sweep_2011().records, Measure::Nodes);
    let by_gamma: Vec<f64> = GAMMAS.iter().map(|&g| mean_at(&m, NullModelKind::Empirical, g, 0.2)).collect();
    let by_theta: Vec<f64> = THETAS.iter().map(|&t| mean_at(&m, NullModelKind::Empirical, 0.05, t)).collect();
    let gamma_monotone = by_gamma.windows(2).all(|w| w[1] <= w[0]);
    let theta_monotone = by_theta.windows(2).all(|w| w[1] >= w[0]);
    let gamma_ratio = by_gamma[0] / by_gamma[4];
    let r2 = r_squared(&THETAS, &by_theta);
    let pass = gamma_monotone && theta_monotone && gamma_ratio >= 3.0 && r2 >= 0.8;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
    report(
        5,
        "capital and exposure sensitivity",
        pass,
        &format!(
            "γ means [{}] ratio(0.01/0.05) {gamma_ratio:.2}; θ means [{}] R² {r2:.3}",
            fmt(&by_gamma),
            fmt(&by_theta)
        ),
    );
    assert!(pass);
}

#[test]
fn deviation_grows_at_low_capital() {
    let m = means(&sweep_2011().records, Measure::Nodes);
    let dev = |k, g| mean_at(&m, k, g, 0.2) / mean_at(&m, NullModelKind::Empirical, g, 0.2);
    let ra = (dev(NullModelKind::Random, 0.01), dev(NullModelKind::Random, 0.05));
    let rf = (dev(NullModelKind::RandomFixedWeight, 0.01), dev(NullModelKind::RandomFixedWeight, 0.05));
    let rewired: Vec<f64> = GAMMAS.iter().map(|&g| dev(NullModelKind::Rewired, g)).collect();
    let (lo, hi) = rewired.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let pass = ra.0 > ra.1 && rf.0 > rf.1 && lo >= 0.85 && hi <= 1.15;
    report(
        6,
        "null-model deviation across γ",
        pass,
        &format!(
            "random {:.3} at γ=0.01 vs {:.3} at γ=0.05; random-fixed-weight {:.3} vs {:.3}; rewired in [{lo:.3}, {hi:.3}]",
            ra.0, ra.1, rf.0, rf.1
        ),
    );
    assert!(pass);
}

/// Mean and standard error per group.
fn grouped(pairs: impl IntoIterator<Item = (i64, f64)>) -> BTreeMap<i64, (f64, f64, usize)> {
    let mut g: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for (k, v) in pairs {
        g.entry(k).or_default().push(v);
    }
    g.into_iter()
        .map(|(k, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            (k, (mean, (var / n).sqrt(), v.len()))
        })
        .collect()
}

#[test]
fn seed_structure_drives_cascade_size() {
    let cfg = ExperimentConfig {
        input: InputSource::Preset("2006-like".into()),
        gamma_grid: vec![0.05],
        theta_grid: vec![0.2],
        null_kinds: vec![NullModelKind::Empirical],
        ..ExperimentConfig::default()
    };
    let records = simulate(&cfg, &MarketData::load(&cfg.input).unwrap()).unwrap().records;
    // Deciles by rank; tied in-degrees share the decile of their lowest rank.
    let mut sorted: Vec<usize> = records.iter().map(|r| r.in_degree).collect();
    sorted.sort_unstable();
    let n = sorted.len();
    let decile = |d: usize| (10 * sorted.partition_point(|&x| x < d) / n) as i64;
    let deciles = grouped(records.iter().map(|r| (decile(r.in_degree), r.node_fraction)));
    let cores = grouped(
        records.iter().filter(|r| (1..=4).contains(&r.core_number)).map(|r| (r.core_number as i64, r.node_fraction)),
    );
    let non_decreasing = |g: &BTreeMap<i64, (f64, f64, usize)>| {
        let v: Vec<f64> = g.values().map(|x| x.0).collect();
        v.windows(2).all(|w| w[1] >= w[0])
    };
    let pass = non_decreasing(&deciles) && non_decreasing(&cores) && cores.len() >= 3 && deciles.len() >= 3;
    let fmt = |g: &BTreeMap<i64, (f64, f64, usize)>| {
        g.iter().map(|(k, (m, se, _))| format!("{k}:{m:.4}±{se:.4}")).collect::<Vec<_>>().join(" ")
    };
    report(
        7,
        "seed in-degree and core number",
        pass,
        &format!("{n} runs; in-degree deciles [{}]; cores [{}]", fmt(&deciles), fmt(&cores)),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// Centrality oracles

fn random_simple_graph(rng: &mut ChaCha8Rng) -> Vec<(u32, u32, i64)> {
    let n = rng.random_range(2..=50u32);
    let p = rng.random_range(0.02..0.5);
    let mut edges = Vec::new();
    for a in 1..=n {
        for b in a + 1..=n {
            if rng.random::<f64>() < p {
                edges.push(if rng.random::<bool>() { (a, b, 1) } else { (b, a, 1) });
            }
        }
    }
    if edges.is_empty() {
        edges.push((1, 2, 1));
    }
    edges
}

/// Undirected neighbour sets by node index.
fn neighbours(net: &DailyNetwork) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); net.node_count()];
    for e in net.edges() {
        let (l, b) = (net.index_of(e.lender).unwrap(), net.index_of(e.borrower).unwrap());
        adj[l].push(b);
        adj[b].push(l);
    }
    adj
}

fn closeness_oracle(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    (0..n)
        .map(|s| {
            let mut dist = vec![None; n];
            dist[s] = Some(0usize);
            let mut q = VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                for &v in &adj[u] {
                    if dist[v].is_none() {
                        dist[v] = Some(dist[u].unwrap() + 1);
                        q.push_back(v);
                    }
                }
            }
            let reached: Vec<usize> = (0..n).filter(|&v| v != s).filter_map(|v| dist[v]).collect();
            if reached.is_empty() {
                return 0.0;
            }
            let r = reached.len() as f64;
            let sum = reached.iter().sum::<usize>() as f64;
            r / sum * r / (n - 1) as f64
        })
        .collect()
}

fn core_oracle(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut core = vec![0; n];
    for k in 1.. {
        let mut alive = vec![true; n];
        loop {
            let drop: Vec<usize> =
                (0..n).filter(|&v| alive[v] && adj[v].iter().filter(|&&u| alive[u]).count() < k).collect();
            if drop.is_empty() {
                break;
            }
            for v in drop {
                alive[v] = false;
            }
        }
        if !alive.iter().any(|&a| a) {
            break;
        }
        for v in (0..n).filter(|&v| alive[v]) {
            core[v] = k;
        }
    }
    core
}

#[test]
fn centrality_matches_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut closeness_bad, mut core_bad) = (0, 0);
    let graphs = 1_000;
    for _ in 0..graphs {
        let net = graph(&random_simple_graph(&mut rng));
        let adj = neighbours(&net);
        closeness_bad += usize::from(closeness_all(&net) != closeness_oracle(&adj));
        core_bad += usize::from(core_numbers(&net) != core_oracle(&adj));
    }
    let pass = closeness_bad == 0 && core_bad == 0;
    report(
        8,
        "closeness and core-number oracles",
        pass,
        &format!("{graphs} graphs; closeness mismatches {closeness_bad}, core mismatches {core_bad}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// End-to-end determinism

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect()
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::TempDir::new().unwrap();
    let cfg = ExperimentConfig {
        replicates: 3,
        max_days: Some(10),
        master_seed: 99,
        out_dir: dir.path().join("out"),
        ..ExperimentConfig::default()
    };
    run_experiment(&cfg).unwrap();
    let first = snapshot(&cfg.out_dir);
    run_experiment(&cfg).unwrap();
    let second = snapshot(&cfg.out_dir);
    let differing: Vec<&String> = first.keys().filter(|k| first.get(*k) != second.get(*k)).collect();
    let pass = !first.is_empty() && first.len() == second.len() && differing.is_empty();
    report(9, "end-to-end determinism", pass, &format!("{} files compared, {} differ", first.len(), differing.len()));
    assert!(pass, "{differing:?}");
}
