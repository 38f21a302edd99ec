//! Daily netted loan networks.
//!
//! Edges point lender → borrower. Out-degree counts the distinct net
//! borrowers a bank lends to, in-degree the distinct net lenders it borrows
//! from. Default shocks travel against edge direction: a defaulted borrower
//! hits its lenders.
//!
//! A [`DailyNetwork`] is immutable once built. Nodes are kept in ascending
//! [`BankId`] order and addressed internally by dense `usize` indices; both
//! edge directions are stored in compressed adjacency form so that
//! `lenders_of` and `borrowers_of` are slice lookups.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Money;

/// Opaque bank identifier, stable across days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BankId(pub u32);

impl fmt::Display for BankId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unrecognised bank identifier {0:?} (expected a non-negative integer)")]
pub struct BankIdParseError(pub String);

impl FromStr for BankId {
    type Err = BankIdParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()) {
            return Err(BankIdParseError(s.to_string()));
        }
        t.parse().map(BankId).map_err(|_| BankIdParseError(s.to_string()))
    }
}

/// One net exposure: `lender` has lent `weight` to `borrower`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub lender: BankId,
    pub borrower: BankId,
    pub weight: Money,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Degree {
    pub in_degree: usize,
    pub out_degree: usize,
}

impl Degree {
    pub fn total(self) -> usize {
        self.in_degree + self.out_degree
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("record {row}: amount {amount} must be positive")]
    NonPositiveAmount { row: usize, amount: Money },
    #[error("record {row}: bank {bank} cannot lend to itself")]
    SelfLoop { row: usize, bank: BankId },
    #[error("self-loop on bank {0}")]
    EdgeSelfLoop(BankId),
    #[error("edge {lender}->{borrower} has non-positive weight {weight}")]
    EdgeWeight { lender: BankId, borrower: BankId, weight: Money },
    #[error("duplicate edge {0}->{1}")]
    DuplicateEdge(BankId, BankId),
    #[error("edges {0}->{1} and {1}->{0} both present; networks must be netted")]
    Reciprocal(BankId, BankId),
    #[error("edge endpoint {0} is not in the node set")]
    UnknownNode(BankId),
    #[error("duplicate node {0}")]
    DuplicateNode(BankId),
}

/// Netted directed weighted graph for one trading day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DailyNetwork {
    date: NaiveDate,
    nodes: Vec<BankId>,
    // Sorted by (lender, borrower).
    edges: Vec<Edge>,
    edge_lender: Vec<u32>,
    edge_borrower: Vec<u32>,
    out_offsets: Vec<u32>,
    out_edges: Vec<u32>,
    in_offsets: Vec<u32>,
    in_edges: Vec<u32>,
}

/// Aggregates and nets gross loan records into a [`DailyNetwork`].
///
/// For every unordered pair the direction with the larger gross total wins
/// and carries the difference. Exact ties produce no edge, and banks left
/// without any edge are not part of the day's node set.
pub fn net_edges(date: NaiveDate, gross: &[(BankId, BankId, Money)]) -> Result<DailyNetwork, NetworkError> {
    let mut pairs: BTreeMap<(BankId, BankId), i64> = BTreeMap::new();
    for (row, &(lender, borrower, amount)) in gross.iter().enumerate() {
        if !amount.is_positive() {
            return Err(NetworkError::NonPositiveAmount { row, amount });
        }
        if lender == borrower {
            return Err(NetworkError::SelfLoop { row, bank: lender });
        }
        // Keyed by (low, high); positive balance means low lends to high.
        let (key, signed) = if lender < borrower {
            ((lender, borrower), amount.units())
        } else {
            ((borrower, lender), -amount.units())
        };
        *pairs.entry(key).or_insert(0) += signed;
    }
    let edges: Vec<Edge> = pairs
        .into_iter()
        .filter(|&(_, net)| net != 0)
        .map(|((lo, hi), net)| {
            if net > 0 {
                Edge { lender: lo, borrower: hi, weight: Money::from_units(net) }
            } else {
                Edge { lender: hi, borrower: lo, weight: Money::from_units(-net) }
            }
        })
        .collect();
    let mut nodes: Vec<BankId> = edges.iter().flat_map(|e| [e.lender, e.borrower]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    DailyNetwork::new(date, nodes, edges)
}

impl DailyNetwork {
    /// Builds a network from an explicit node set and net edges, checking
    /// the netting invariants. Nodes without edges are allowed here (null
    /// models keep the day's node set even if a node loses all its links).
    pub fn new(date: NaiveDate, mut nodes: Vec<BankId>, mut edges: Vec<Edge>) -> Result<Self, NetworkError> {
        nodes.sort_unstable();
        if let Some(w) = nodes.windows(2).find(|w| w[0] == w[1]) {
            return Err(NetworkError::DuplicateNode(w[0]));
        }
        edges.sort_unstable_by_key(|e| (e.lender, e.borrower));
        let index: HashMap<BankId, u32> = nodes.iter().enumerate().map(|(i, &b)| (b, i as u32)).collect();
        let mut pair_seen: HashMap<(u32, u32), (BankId, BankId)> = HashMap::with_capacity(edges.len());
        let mut edge_lender = Vec::with_capacity(edges.len());
        let mut edge_borrower = Vec::with_capacity(edges.len());
        for e in &edges {
            if e.lender == e.borrower {
                return Err(NetworkError::EdgeSelfLoop(e.lender));
            }
            if !e.weight.is_positive() {
                return Err(NetworkError::EdgeWeight { lender: e.lender, borrower: e.borrower, weight: e.weight });
            }
            let l = *index.get(&e.lender).ok_or(NetworkError::UnknownNode(e.lender))?;
            let b = *index.get(&e.borrower).ok_or(NetworkError::UnknownNode(e.borrower))?;
            let key = (l.min(b), l.max(b));
            if let Some(&(pl, pb)) = pair_seen.get(&key) {
                return Err(if pl == e.lender {
                    NetworkError::DuplicateEdge(pl, pb)
                } else {
                    NetworkError::Reciprocal(pl, pb)
                });
            }
            pair_seen.insert(key, (e.lender, e.borrower));
            edge_lender.push(l);
            edge_borrower.push(b);
        }
        let n = nodes.len();
        let (out_offsets, out_edges) = compress(n, &edge_lender);
        let (in_offsets, in_edges) = compress(n, &edge_borrower);
        Ok(DailyNetwork {
            date,
            nodes,
            edges,
            edge_lender,
            edge_borrower,
            out_offsets,
            out_edges,
            in_offsets,
            in_edges,
        })
    }

    /// Same node set and date, new edges given by node index.
    pub fn with_index_edges(
        &self,
        edges: impl IntoIterator<Item = (usize, usize, Money)>,
    ) -> Result<Self, NetworkError> {
        let edges = edges
            .into_iter()
            .map(|(l, b, weight)| Edge { lender: self.nodes[l], borrower: self.nodes[b], weight })
            .collect();
        DailyNetwork::new(self.date, self.nodes.clone(), edges)
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn nodes(&self) -> &[BankId] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, bank: BankId) -> Option<usize> {
        self.nodes.binary_search(&bank).ok()
    }

    pub fn bank(&self, index: usize) -> BankId {
        self.nodes[index]
    }

    /// `(lender index, borrower index)` of edge `e`.
    pub fn endpoints(&self, e: usize) -> (usize, usize) {
        (self.edge_lender[e] as usize, self.edge_borrower[e] as usize)
    }

    /// Indices of edges on which node `i` is the borrower, ordered by lender.
    pub fn in_edge_ids(&self, i: usize) -> &[u32] {
        &self.in_edges[self.in_offsets[i] as usize..self.in_offsets[i + 1] as usize]
    }

    /// Indices of edges on which node `i` is the lender, ordered by borrower.
    pub fn out_edge_ids(&self, i: usize) -> &[u32] {
        &self.out_edges[self.out_offsets[i] as usize..self.out_offsets[i + 1] as usize]
    }

    /// Banks that lent to `i`, with the net amount.
    pub fn lenders_of(&self, i: usize) -> impl Iterator<Item = (usize, Money)> + '_ {
        self.in_edge_ids(i).iter().map(move |&e| (self.edge_lender[e as usize] as usize, self.edges[e as usize].weight))
    }

    /// Banks that `i` lent to, with the net amount.
    pub fn borrowers_of(&self, i: usize) -> impl Iterator<Item = (usize, Money)> + '_ {
        self.out_edge_ids(i)
            .iter()
            .map(move |&e| (self.edge_borrower[e as usize] as usize, self.edges[e as usize].weight))
    }

    pub fn in_degree(&self, i: usize) -> usize {
        (self.in_offsets[i + 1] - self.in_offsets[i]) as usize
    }

    pub fn out_degree(&self, i: usize) -> usize {
        (self.out_offsets[i + 1] - self.out_offsets[i]) as usize
    }

    /// Interbank lending L of node `i`.
    pub fn lending(&self, i: usize) -> Money {
        self.borrowers_of(i).map(|(_, w)| w).sum()
    }

    /// Interbank borrowing B of node `i`.
    pub fn borrowing(&self, i: usize) -> Money {
        self.lenders_of(i).map(|(_, w)| w).sum()
    }

    pub fn total_lending(&self) -> Money {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Per-bank in/out degree.
    pub fn degrees(&self) -> BTreeMap<BankId, Degree> {
        (0..self.node_count())
            .map(|i| (self.nodes[i], Degree { in_degree: self.in_degree(i), out_degree: self.out_degree(i) }))
            .collect()
    }

    /// Per-index in/out degree, aligned with [`DailyNetwork::nodes`].
    pub fn degree_vec(&self) -> Vec<Degree> {
        (0..self.node_count())
            .map(|i| Degree { in_degree: self.in_degree(i), out_degree: self.out_degree(i) })
            .collect()
    }

    /// True when every node has at least one edge.
    pub fn all_nodes_active(&self) -> bool {
        (0..self.node_count()).all(|i| self.in_degree(i) + self.out_degree(i) > 0)
    }

    /// Neighbour lists of the undirected projection, by node index.
    pub fn undirected_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for e in 0..self.edge_count() {
            let (l, b) = self.endpoints(e);
            adj[l].push(b);
            adj[b].push(l);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Weakly connected components as node-index sets, largest first.
    pub fn component_indices(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in 0..self.edge_count() {
            let (l, b) = self.endpoints(e);
            let (rl, rb) = (find(&mut parent, l), find(&mut parent, b));
            if rl != rb {
                parent[rl.max(rb)] = rl.min(rb);
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        let mut comps: Vec<Vec<usize>> = groups.into_values().collect();
        // Stable sort keeps ties ordered by smallest member.
        comps.sort_by_key(|c| std::cmp::Reverse(c.len()));
        comps
    }

    /// Weakly connected components, largest first.
    pub fn weak_components(&self) -> Vec<Vec<BankId>> {
        self.component_indices().into_iter().map(|c| c.into_iter().map(|i| self.nodes[i]).collect()).collect()
    }

    /// Gross-style triples for the edges, suitable for re-netting.
    pub fn edge_triples(&self) -> Vec<(BankId, BankId, Money)> {
        self.edges.iter().map(|e| (e.lender, e.borrower, e.weight)).collect()
    }
}

fn compress(n: usize, keys: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let mut offsets = vec![0u32; n + 1];
    for &k in keys {
        offsets[k as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut ids = vec![0u32; keys.len()];
    for (e, &k) in keys.iter().enumerate() {
        ids[cursor[k as usize] as usize] = e as u32;
        cursor[k as usize] += 1;
    }
    (offsets, ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn day() -> NaiveDate {
        NaiveDate::from_ymd_opt(2011, 3, 1).unwrap()
    }

    fn m(x: i64) -> Money {
        Money::from_whole(x)
    }

    const A: BankId = BankId(1);
    const B: BankId = BankId(2);
    const C: BankId = BankId(3);
    const D: BankId = BankId(4);

    #[test]
    fn opposing_loans_net_to_difference() {
        let net = net_edges(day(), &[(A, B, m(10)), (B, A, m(4))]).unwrap();
        assert_eq!(net.edges(), &[Edge { lender: A, borrower: B, weight: m(6) }]);
        assert_eq!(net.nodes(), &[A, B]);
    }

    #[test]
    fn exact_tie_drops_pair_and_nodes() {
        let net = net_edges(day(), &[(A, B, m(5)), (B, A, m(5))]).unwrap();
        assert!(net.is_empty());
        assert_eq!(net.edge_count(), 0);
    }

    #[test]
    fn repeated_trades_aggregate() {
        let net = net_edges(day(), &[(A, B, m(3)), (A, B, m(2)), (C, A, m(1))]).unwrap();
        assert_eq!(
            net.edges(),
            &[Edge { lender: A, borrower: B, weight: m(5) }, Edge { lender: C, borrower: A, weight: m(1) },]
        );
    }

    #[test]
    fn bad_records_report_row() {
        let err = net_edges(day(), &[(A, B, m(1)), (A, B, m(0))]).unwrap_err();
        assert_eq!(err, NetworkError::NonPositiveAmount { row: 1, amount: m(0) });
        let err = net_edges(day(), &[(C, C, m(1))]).unwrap_err();
        assert_eq!(err, NetworkError::SelfLoop { row: 0, bank: C });
    }

    #[test]
    fn constructor_rejects_reciprocal_and_duplicate() {
        let e = |l, b| Edge { lender: l, borrower: b, weight: m(1) };
        assert_eq!(
            DailyNetwork::new(day(), vec![A, B], vec![e(A, B), e(B, A)]).unwrap_err(),
            NetworkError::Reciprocal(A, B)
        );
        assert_eq!(
            DailyNetwork::new(day(), vec![A, B], vec![e(A, B), e(A, B)]).unwrap_err(),
            NetworkError::DuplicateEdge(A, B)
        );
        assert_eq!(DailyNetwork::new(day(), vec![A], vec![e(A, B)]).unwrap_err(), NetworkError::UnknownNode(B));
    }

    #[test]
    fn single_edge_degrees() {
        let net = net_edges(day(), &[(A, B, m(1))]).unwrap();
        let d = net.degrees();
        assert_eq!(d[&A], Degree { in_degree: 0, out_degree: 1 });
        assert_eq!(d[&B], Degree { in_degree: 1, out_degree: 0 });
    }

    #[test]
    fn star_degrees() {
        let hub = BankId(100);
        let gross: Vec<_> = (0..5).map(|k| (hub, BankId(k), m(2))).collect();
        let net = net_edges(day(), &gross).unwrap();
        let d = net.degrees();
        assert_eq!(d[&hub].out_degree, 5);
        assert_eq!(d[&hub].in_degree, 0);
        for k in 0..5 {
            assert_eq!(d[&BankId(k)], Degree { in_degree: 1, out_degree: 0 });
        }
    }

    #[test]
    fn components() {
        let net = net_edges(day(), &[(A, B, m(1)), (B, C, m(1))]).unwrap();
        assert_eq!(net.weak_components(), vec![vec![A, B, C]]);
        let net = net_edges(day(), &[(A, B, m(1)), (C, D, m(1))]).unwrap();
        assert_eq!(net.weak_components(), vec![vec![A, B], vec![C, D]]);
    }

    #[test]
    fn adjacency_views_agree() {
        let net = net_edges(day(), &[(A, B, m(3)), (C, B, m(2)), (B, D, m(7))]).unwrap();
        let b = net.index_of(B).unwrap();
        let lenders: Vec<_> = net.lenders_of(b).map(|(i, w)| (net.bank(i), w)).collect();
        assert_eq!(lenders, vec![(A, m(3)), (C, m(2))]);
        assert_eq!(net.borrowing(b), m(5));
        assert_eq!(net.lending(b), m(7));
        assert_eq!(net.total_lending(), m(12));
    }

    fn gross_strategy(banks: u32) -> impl Strategy<Value = Vec<(BankId, BankId, Money)>> {
        prop::collection::vec((0..banks, 0..banks, 1i64..50), 0..40).prop_map(|v| {
            v.into_iter()
                .filter(|(a, b, _)| a != b)
                .map(|(a, b, w)| (BankId(a), BankId(b), Money::from_units(w)))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn netting_invariants(gross in gross_strategy(8)) {
            let net = net_edges(day(), &gross).unwrap();
            // Idempotence.
            let again = net_edges(day(), &net.edge_triples()).unwrap();
            prop_assert_eq!(&again, &net);
            // Degree sums.
            let d = net.degrees();
            prop_assert_eq!(d.values().map(|x| x.in_degree).sum::<usize>(), net.edge_count());
            prop_assert_eq!(d.values().map(|x| x.out_degree).sum::<usize>(), net.edge_count());
            prop_assert!(net.all_nodes_active());
            // Conservation of net weight.
            let mut pair: BTreeMap<(u32, u32), i64> = BTreeMap::new();
            for &(l, b, w) in &gross {
                let (k, s) = if l < b { ((l.0, b.0), w.units()) } else { ((b.0, l.0), -w.units()) };
                *pair.entry(k).or_default() += s;
            }
            let expected: i64 = pair.values().map(|v| v.abs()).sum();
            prop_assert_eq!(net.total_lending().units(), expected);
            prop_assert!(net.total_lending().units() <= gross.iter().map(|g| g.2.units()).sum::<i64>());
            // Components partition the nodes.
            let mut covered: Vec<BankId> = net.weak_components().concat();
            covered.sort();
            prop_assert_eq!(covered, net.nodes().to_vec());
        }

        #[test]
        fn components_match_union_find_oracle(gross in gross_strategy(20)) {
            let net = net_edges(day(), &gross).unwrap();
            // Oracle: repeated relabel-to-min until fixed point.
            let n = net.node_count();
            let mut label: Vec<usize> = (0..n).collect();
            loop {
                let mut changed = false;
                for e in net.edges() {
                    let (l, b) = (net.index_of(e.lender).unwrap(), net.index_of(e.borrower).unwrap());
                    let lo = label[l].min(label[b]);
                    if label[l] != lo || label[b] != lo {
                        label[l] = lo;
                        label[b] = lo;
                        changed = true;
                    }
                }
                if !changed { break; }
            }
            let mut expected: BTreeMap<usize, Vec<BankId>> = BTreeMap::new();
            for i in 0..n {
                expected.entry(label[i]).or_default().push(net.bank(i));
            }
            let mut expected: Vec<Vec<BankId>> = expected.into_values().collect();
            let mut got = net.weak_components();
            expected.sort();
            got.sort();
            prop_assert_eq!(got, expected);
        }
    }
}
