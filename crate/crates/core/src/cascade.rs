//! Default-cascade propagation.
//!
//! A seed bank defaults exogenously and repays none of its interbank
//! borrowing, so each of its lenders writes off the full loan. A lender whose
//! cumulative write-off reaches its capital defaults in turn and repays its
//! own lenders out of what is left once the shock has eaten its capital:
//!
//! ```text
//! residual = S_i − C_i
//! paid-out loss on loan L_ji = L_ji                      if residual > B_i
//!                            = residual · L_ji / Σ_k L_ki  otherwise
//! ```
//!
//! Propagation runs in synchronous passes. Each pass recomputes the
//! cumulative shock of every lender whose write-offs changed, defaults all of
//! them that reached their capital together, then re-evaluates the loss every
//! defaulted bank passes on from its *total* shock. A bank that keeps
//! receiving shock after it defaulted therefore forwards the increment with
//! no further absorption. Propagation stops at the first pass in which
//! nothing changes. Only passes that default at least one bank count as
//! rounds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::BalanceSheet;
use crate::network::{BankId, DailyNetwork};

/// Upper bound on propagation passes.
pub const MAX_PASSES: u32 = 100_000;

/// Smallest number of loops worth fast-forwarding around a cycle.
const MIN_SKIPPED_LOOPS: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CascadeError {
    #[error("bank {0} is not active on this day")]
    UnknownSeed(BankId),
    #[error("bank {0} has no interbank borrowing and cannot seed a cascade")]
    NotABorrower(BankId),
    #[error("{sheets} balance sheets supplied for {nodes} nodes")]
    SheetCount { sheets: usize, nodes: usize },
    #[error("sheet {index} belongs to bank {found}, expected {expected}")]
    SheetOrder { index: usize, expected: BankId, found: BankId },
    #[error("bank {0} is not in the network")]
    UnknownBank(BankId),
}

/// Loss passed on loan `loan` by a defaulted bank with cumulative shock
/// `shock`, capital `capital` and total borrowing `borrowing`.
pub fn passed_loss(shock: f64, capital: f64, borrowing: f64, loan: f64) -> f64 {
    let residual = shock - capital;
    if residual <= 0.0 {
        0.0
    } else if residual > borrowing {
        loan
    } else {
        (residual * loan / borrowing).min(loan)
    }
}

/// Measure used to classify a cascade against a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Nodes,
    Lending,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeResult {
    pub seed: BankId,
    /// Borrowing of the seed, all of which is lost.
    pub initial_shock: f64,
    /// Knock-on defaults with the round in which each occurred, in
    /// (round, bank) order. The seed is not listed.
    pub defaulted: Vec<(BankId, u32)>,
    pub defaulted_count: usize,
    /// `defaulted_count / (nodes − 1)`.
    pub node_fraction: f64,
    /// Unrecovered interbank lending over the whole cascade.
    pub lending_loss: f64,
    /// `lending_loss` over the day's total interbank lending.
    pub loss_fraction: f64,
    pub rounds: u32,
    pub passes: u32,
    /// False only if [`MAX_PASSES`] was hit.
    pub converged: bool,
}

impl CascadeResult {
    pub fn size(&self, measure: Measure) -> f64 {
        match measure {
            Measure::Nodes => self.node_fraction,
            Measure::Lending => self.loss_fraction,
        }
    }
}

/// True iff the cascade affected strictly more than `threshold` of the
/// chosen measure.
pub fn classify_cascade(result: &CascadeResult, threshold: f64, by: Measure) -> bool {
    debug_assert!(threshold > 0.0 && threshold < 1.0);
    result.size(by) > threshold
}

/// Mutable state of one cascade on a fixed network and set of sheets.
///
/// Reusable: [`CascadeState::reset`] clears it for the next seed without
/// reallocating.
#[derive(Debug, Clone)]
pub struct CascadeState<'a> {
    net: &'a DailyNetwork,
    sheets: &'a [BalanceSheet],
    loan: Vec<f64>,
    borrowing: Vec<f64>,
    total_lending: f64,
    edge_loss: Vec<f64>,
    received: Vec<f64>,
    default_round: Vec<Option<u32>>,
    seed: Option<usize>,
    touched: Vec<usize>,
    next_touched: Vec<usize>,
    mark: Vec<bool>,
    defaulted: Vec<(usize, u32)>,
    round: u32,
    passes: u32,
}

impl<'a> CascadeState<'a> {
    pub fn new(net: &'a DailyNetwork, sheets: &'a [BalanceSheet]) -> Result<Self, CascadeError> {
        if sheets.len() != net.node_count() {
            return Err(CascadeError::SheetCount { sheets: sheets.len(), nodes: net.node_count() });
        }
        for (index, (s, &b)) in sheets.iter().zip(net.nodes()).enumerate() {
            if s.bank != b {
                return Err(CascadeError::SheetOrder { index, expected: b, found: s.bank });
            }
        }
        let n = net.node_count();
        let loan: Vec<f64> = net.edges().iter().map(|e| e.weight.to_millions()).collect();
        let borrowing = (0..n).map(|i| net.borrowing(i).to_millions()).collect();
        Ok(CascadeState {
            net,
            sheets,
            loan,
            borrowing,
            total_lending: net.total_lending().to_millions(),
            edge_loss: vec![0.0; net.edge_count()],
            received: vec![0.0; n],
            default_round: vec![None; n],
            seed: None,
            touched: Vec::new(),
            next_touched: Vec::new(),
            mark: vec![false; n],
            defaulted: Vec::new(),
            round: 0,
            passes: 0,
        })
    }

    pub fn reset(&mut self) {
        self.edge_loss.iter_mut().for_each(|x| *x = 0.0);
        self.received.iter_mut().for_each(|x| *x = 0.0);
        self.default_round.iter_mut().for_each(|x| *x = None);
        self.mark.iter_mut().for_each(|x| *x = false);
        self.seed = None;
        self.touched.clear();
        self.next_touched.clear();
        self.defaulted.clear();
        self.round = 0;
        self.passes = 0;
    }

    fn index(&self, bank: BankId) -> Result<usize, CascadeError> {
        self.net.index_of(bank).ok_or(CascadeError::UnknownBank(bank))
    }

    /// Defaults `seed` at round 0: every net lender to it loses the full loan.
    pub fn seed_default(&mut self, seed: BankId) -> Result<(), CascadeError> {
        let s = self.net.index_of(seed).ok_or(CascadeError::UnknownSeed(seed))?;
        if self.net.in_degree(s) == 0 {
            return Err(CascadeError::NotABorrower(seed));
        }
        self.reset();
        self.seed = Some(s);
        self.default_round[s] = Some(0);
        for &e in self.net.in_edge_ids(s) {
            let e = e as usize;
            self.edge_loss[e] = self.loan[e];
            let (lender, _) = self.net.endpoints(e);
            self.touch(lender);
        }
        std::mem::swap(&mut self.touched, &mut self.next_touched);
        self.clear_marks();
        Ok(())
    }

    fn touch(&mut self, i: usize) {
        if !self.mark[i] {
            self.mark[i] = true;
            self.next_touched.push(i);
        }
    }

    fn clear_marks(&mut self) {
        for &i in &self.touched {
            self.mark[i] = false;
        }
    }

    /// Cumulative shock received by `bank`.
    pub fn received_shock(&self, bank: BankId) -> Result<f64, CascadeError> {
        Ok(self.received[self.index(bank)?])
    }

    /// Round in which `bank` defaulted (0 for the seed).
    pub fn default_round(&self, bank: BankId) -> Result<Option<u32>, CascadeError> {
        Ok(self.default_round[self.index(bank)?])
    }

    /// Losses that defaulted bank `bank` passes to each of its lenders given
    /// its current cumulative shock. Empty if it has no borrowing.
    pub fn distribute_residual(&self, bank: BankId) -> Result<Vec<(BankId, f64)>, CascadeError> {
        let i = self.index(bank)?;
        Ok(self
            .net
            .in_edge_ids(i)
            .iter()
            .map(|&e| {
                let e = e as usize;
                let (lender, _) = self.net.endpoints(e);
                (self.net.bank(lender), self.outflow(i, e))
            })
            .collect())
    }

    fn outflow(&self, i: usize, e: usize) -> f64 {
        if Some(i) == self.seed {
            self.loan[e]
        } else {
            passed_loss(self.received[i], self.sheets[i].capital, self.borrowing[i], self.loan[e])
        }
    }

    /// One synchronous pass. Returns false once the state is a fixed point.
    pub fn step(&mut self) -> bool {
        if self.touched.is_empty() {
            return false;
        }
        self.passes += 1;
        // Cumulative shocks of lenders whose write-offs changed.
        for &j in &self.touched {
            self.received[j] = self.net.out_edge_ids(j).iter().map(|&e| self.edge_loss[e as usize]).sum();
        }
        // Simultaneous defaults.
        self.touched.sort_unstable();
        let mut new_defaults = false;
        for &j in &self.touched {
            if self.default_round[j].is_none() && self.received[j] >= self.sheets[j].capital {
                if !new_defaults {
                    self.round += 1;
                    new_defaults = true;
                }
                self.default_round[j] = Some(self.round);
                self.defaulted.push((j, self.round));
            }
        }
        if !new_defaults && self.passes as usize > 2 * self.net.node_count() {
            self.skip_circulation();
        }
        // Re-evaluate what each affected defaulted bank passes on.
        let touched = std::mem::take(&mut self.touched);
        for &i in &touched {
            if self.default_round[i].is_none() || Some(i) == self.seed {
                continue;
            }
            for &e in self.net.in_edge_ids(i) {
                let e = e as usize;
                let loss = self.outflow(i, e);
                if loss != self.edge_loss[e] {
                    self.edge_loss[e] = loss;
                    let (lender, _) = self.net.endpoints(e);
                    self.touch(lender);
                }
            }
        }
        self.touched = touched;
        self.touched.clear();
        std::mem::swap(&mut self.touched, &mut self.next_touched);
        self.clear_marks();
        new_defaults || !self.touched.is_empty()
    }

    /// Fast-forwards shock that circulates around closed loops of defaulted
    /// banks.
    ///
    /// A defaulted bank with a single lender forwards every increment of its
    /// shock in full. On a cycle of such banks the pending increments travel
    /// around unchanged, so each full loop adds their sum to every loan on the
    /// cycle until the first loan is wiped out. This applies whole loops at
    /// once when every bank still in motion sits on such a cycle.
    fn skip_circulation(&mut self) {
        let n = self.net.node_count();
        let mut on_cycle = vec![false; n];
        let mut cycles: Vec<Vec<usize>> = Vec::new();
        for &start in &self.touched {
            if on_cycle[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut i = start;
            loop {
                if !self.passes_through_fully(i) || cycle.len() >= n {
                    return;
                }
                cycle.push(i);
                i = self.net.endpoints(self.net.in_edge_ids(i)[0] as usize).0;
                if i == start {
                    break;
                }
            }
            for &i in &cycle {
                on_cycle[i] = true;
            }
            cycles.push(cycle);
        }
        for cycle in cycles {
            let (mut pending, mut slack) = (0.0, f64::INFINITY);
            for &i in &cycle {
                let e = self.net.in_edge_ids(i)[0] as usize;
                pending += (self.received[i] - self.sheets[i].capital - self.edge_loss[e]).max(0.0);
                slack = slack.min(self.loan[e] - self.edge_loss[e]);
            }
            let loops = (slack / pending).floor() - 1.0;
            if !(pending > 0.0 && loops >= MIN_SKIPPED_LOOPS) {
                continue;
            }
            let gain = loops * pending;
            for &i in &cycle {
                let e = self.net.in_edge_ids(i)[0] as usize;
                self.edge_loss[e] += gain;
                self.received[self.net.endpoints(e).0] += gain;
            }
        }
    }

    /// Defaulted non-seed bank with one lender whose loan is not yet wiped out.
    fn passes_through_fully(&self, i: usize) -> bool {
        if self.default_round[i].is_none() || Some(i) == self.seed || self.net.in_degree(i) != 1 {
            return false;
        }
        let e = self.net.in_edge_ids(i)[0] as usize;
        self.edge_loss[e] < self.loan[e] && self.received[i] - self.sheets[i].capital < self.borrowing[i]
    }

    /// Runs passes until nothing changes.
    pub fn run_to_fixed_point(&mut self) -> bool {
        while self.passes < MAX_PASSES {
            if !self.step() {
                return true;
            }
        }
        self.touched.is_empty()
    }

    pub fn result(&self) -> CascadeResult {
        let seed = self.seed.expect("cascade has no seed");
        let n = self.net.node_count();
        let lending_loss: f64 = self.edge_loss.iter().sum();
        let defaulted_count = self.defaulted.len();
        CascadeResult {
            seed: self.net.bank(seed),
            initial_shock: self.borrowing[seed],
            defaulted: self.defaulted.iter().map(|&(i, r)| (self.net.bank(i), r)).collect(),
            defaulted_count,
            node_fraction: if n > 1 { defaulted_count as f64 / (n - 1) as f64 } else { 0.0 },
            lending_loss,
            loss_fraction: if self.total_lending > 0.0 { lending_loss / self.total_lending } else { 0.0 },
            rounds: self.round,
            passes: self.passes,
            converged: self.touched.is_empty(),
        }
    }

    /// Per-edge unrecovered loss, aligned with `net.edges()`.
    pub fn edge_losses(&self) -> &[f64] {
        &self.edge_loss
    }

    /// Node indices that defaulted, seed included.
    pub fn is_defaulted(&self, index: usize) -> bool {
        self.default_round[index].is_some()
    }

    /// Runs a full cascade for `seed`, reusing this state's buffers.
    pub fn run(&mut self, seed: BankId) -> Result<CascadeResult, CascadeError> {
        self.seed_default(seed)?;
        self.run_to_fixed_point();
        Ok(self.result())
    }
}

/// Simulates the default of `seed` on `net` with the given sheets.
pub fn run_cascade(net: &DailyNetwork, sheets: &[BalanceSheet], seed: BankId) -> Result<CascadeResult, CascadeError> {
    CascadeState::new(net, sheets)?.run(seed)
}

/// Banks eligible as seeds: every node with at least one lender.
pub fn eligible_seeds(net: &DailyNetwork) -> Vec<BankId> {
    (0..net.node_count()).filter(|&i| net.in_degree(i) > 0).map(|i| net.bank(i)).collect()
}
