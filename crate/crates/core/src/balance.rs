//! Stylised bank balance sheets.
//!
//! Every item is a fixed fraction of total assets `TA`, which is derived from
//! the bank's mean trading volume: `TA = <TV> / (2θ)`. Interbank lending `L`
//! and borrowing `B` come from the day's network; external assets
//! `A = TA − L`, capital `C = γ·TA` and deposits `D = (1 − γ)·TA − B` close
//! the identity `A + L = C + D + B = TA`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Money;
use crate::network::{BankId, DailyNetwork};

/// Balance-sheet ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Interbank lending over total assets.
    pub theta: f64,
    /// Capital over total assets.
    pub gamma: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params { theta: 0.2, gamma: 0.05 }
    }
}

impl Params {
    pub fn new(theta: f64, gamma: f64) -> Result<Self, BalanceError> {
        let p = Params { theta, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), BalanceError> {
        for (name, v) in [("theta", self.theta), ("gamma", self.gamma)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(BalanceError::InvalidParam { name, value: v });
            }
        }
        Ok(())
    }
}

/// How [`make_balance_sheet`] treats inputs whose derived sheet would carry
/// negative external assets or negative deposits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SheetPolicy {
    /// Reject the sheet.
    #[default]
    Strict,
    /// Raise total assets to `max(TA, L, B / (1 − γ))`.
    Clamp,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BalanceError {
    #[error("{name} = {value} must lie strictly between 0 and 1")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("bank {bank}: mean trading volume {tv_mean} must be positive")]
    NonPositiveVolume { bank: BankId, tv_mean: f64 },
    #[error("bank {bank}: lending {lending} exceeds total assets {total_assets}")]
    NegativeExternalAssets { bank: BankId, lending: f64, total_assets: f64 },
    #[error("bank {bank}: borrowing {borrowing} leaves negative deposits {deposits}")]
    NegativeDeposits { bank: BankId, borrowing: f64, deposits: f64 },
    #[error("bank {bank}: loss {loss} outside [0, L = {lending}]")]
    LossOutOfRange { bank: BankId, loss: f64, lending: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceSheet {
    pub bank: BankId,
    pub total_assets: f64,
    pub external_assets: f64,
    pub lending: f64,
    pub borrowing: f64,
    pub capital: f64,
    pub deposits: f64,
    /// Total assets were raised by [`SheetPolicy::Clamp`].
    pub clamped: bool,
}

impl BalanceSheet {
    /// Sheet of a bank with no interbank activity at all (possible only in
    /// randomised networks). It can neither receive nor pass shocks.
    pub fn dormant(bank: BankId) -> Self {
        BalanceSheet {
            bank,
            total_assets: 0.0,
            external_assets: 0.0,
            lending: 0.0,
            borrowing: 0.0,
            capital: 0.0,
            deposits: 0.0,
            clamped: false,
        }
    }

    /// `(A + L) − (C + D + B)` relative to `TA`; zero up to rounding.
    pub fn identity_residual(&self) -> f64 {
        let lhs = self.external_assets + self.lending;
        let rhs = self.capital + self.deposits + self.borrowing;
        if self.total_assets == 0.0 {
            lhs - rhs
        } else {
            (lhs - rhs) / self.total_assets
        }
    }

    /// Post-shock solvency: the bank survives a write-off of `lending_loss`
    /// on its interbank assets iff the loss is strictly below its capital.
    pub fn is_solvent(&self, lending_loss: f64) -> Result<bool, BalanceError> {
        if !(lending_loss >= 0.0 && lending_loss <= self.lending) {
            return Err(BalanceError::LossOutOfRange { bank: self.bank, loss: lending_loss, lending: self.lending });
        }
        Ok(lending_loss < self.capital)
    }
}

pub fn make_balance_sheet(
    bank: BankId,
    lending: Money,
    borrowing: Money,
    tv_mean: f64,
    params: Params,
    policy: SheetPolicy,
) -> Result<BalanceSheet, BalanceError> {
    params.validate()?;
    if tv_mean.is_nan() || tv_mean <= 0.0 {
        return Err(BalanceError::NonPositiveVolume { bank, tv_mean });
    }
    let l = lending.to_millions();
    let b = borrowing.to_millions();
    let Params { theta, gamma } = params;
    let base = tv_mean / (2.0 * theta);
    let total_assets = match policy {
        SheetPolicy::Strict => {
            if l > base {
                return Err(BalanceError::NegativeExternalAssets { bank, lending: l, total_assets: base });
            }
            let deposits = (1.0 - gamma) * base - b;
            if deposits < 0.0 {
                return Err(BalanceError::NegativeDeposits { bank, borrowing: b, deposits });
            }
            base
        }
        SheetPolicy::Clamp => base.max(l).max(b / (1.0 - gamma)),
    };
    let deposits = ((1.0 - gamma) * total_assets - b).max(0.0);
    Ok(BalanceSheet {
        bank,
        total_assets,
        external_assets: (total_assets - l).max(0.0),
        lending: l,
        borrowing: b,
        capital: gamma * total_assets,
        deposits,
        clamped: total_assets != base,
    })
}

/// Sheets for every node of `net`, index-aligned with `net.nodes()`.
///
/// `tv_mean(i)` supplies the mean trading volume of node `i`. Nodes without
/// any edge get a [`BalanceSheet::dormant`] sheet and no volume lookup.
pub fn sheets_for_network<F>(
    net: &DailyNetwork,
    mut tv_mean: F,
    params: Params,
    policy: SheetPolicy,
) -> Result<Vec<BalanceSheet>, BalanceError>
where
    F: FnMut(usize) -> f64,
{
    (0..net.node_count())
        .map(|i| {
            let bank = net.bank(i);
            if net.in_degree(i) + net.out_degree(i) == 0 {
                return Ok(BalanceSheet::dormant(bank));
            }
            make_balance_sheet(bank, net.lending(i), net.borrowing(i), tv_mean(i), params, policy)
        })
        .collect()
}

/// Free-function form of [`BalanceSheet::is_solvent`].
pub fn is_solvent(sheet: &BalanceSheet, lending_loss: f64) -> Result<bool, BalanceError> {
    sheet.is_solvent(lending_loss)
}
