//! Transaction files, daily grouping and rolling trading volume.
//!
//! Input is delimiter-separated UTF-8 text with a header row. The columns
//! are located by name, so their order is free:
//!
//! | column      | content                                         |
//! |-------------|-------------------------------------------------|
//! | `date`      | ISO-8601 calendar day, `YYYY-MM-DD`             |
//! | `time`      | intraday time, `HH:MM:SS` with optional fraction|
//! | `lender`    | non-negative integer bank id                    |
//! | `borrower`  | non-negative integer bank id                    |
//! | `amount`    | decimal EUR millions, > 0, at most 6 decimals   |
//! | `rate`      | decimal percent (carried, unused)               |
//! | `aggressor` | `L`, `B` or `U`                                 |

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveTime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Money;
use crate::network::{net_edges, BankId, DailyNetwork, NetworkError};

pub const COLUMNS: [&str; 7] = ["date", "time", "lender", "borrower", "amount", "rate", "aggressor"];

/// Side that initiated a trade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Aggressor {
    Lender,
    Borrower,
    Unknown,
}

impl Aggressor {
    pub fn code(self) -> &'static str {
        match self {
            Aggressor::Lender => "L",
            Aggressor::Borrower => "B",
            Aggressor::Unknown => "U",
        }
    }
}

/// One raw overnight loan trade.
#[derive(Debug, Clone, PartialEq)]
pub struct LoanTransaction {
    pub date: NaiveDate,
    pub time: NaiveTime,
    pub lender: BankId,
    pub borrower: BankId,
    pub amount: Money,
    pub rate: f64,
    pub aggressor: Aggressor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordFormat {
    pub delimiter: u8,
}

impl Default for RecordFormat {
    fn default() -> Self {
        RecordFormat { delimiter: b',' }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: u64, message: String },
    #[error("header is missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}, field `{field}`: {message}")]
    Field { line: u64, field: &'static str, message: String },
    #[error("line {line}: rejected record: {reason}")]
    Rejected { line: u64, reason: String },
    #[error("bank {0} has no trading history up to the requested day")]
    UndefinedHistory(BankId),
    #[error("netting failed on {date}: {source}")]
    Netting { date: NaiveDate, source: NetworkError },
}

/// Parses every record of a transaction file, preserving row order.
pub fn parse_transactions<R: Read>(reader: R, format: RecordFormat) -> Result<Vec<LoanTransaction>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(csv_error(e)),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(Vec::new());
    }
    let mut idx = [0usize; 7];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = headers.iter().position(|h| h.eq_ignore_ascii_case(name)).ok_or(IngestError::MissingColumn(name))?;
    }
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(csv_error(e)),
        }
        let line = record.position().map_or(0, |p| p.line());
        let field = |k: usize| record.get(idx[k]).unwrap_or("");
        let bad = |field: &'static str, message: String| IngestError::Field { line, field, message };

        let date =
            NaiveDate::parse_from_str(field(0), "%Y-%m-%d").map_err(|e| bad("date", format!("{:?}: {e}", field(0))))?;
        let time = NaiveTime::parse_from_str(field(1), "%H:%M:%S%.f")
            .map_err(|e| bad("time", format!("{:?}: {e}", field(1))))?;
        let lender: BankId = field(2).parse().map_err(|e| bad("lender", format!("{e}")))?;
        let borrower: BankId = field(3).parse().map_err(|e| bad("borrower", format!("{e}")))?;
        let amount: Money = field(4).parse().map_err(|e| bad("amount", format!("{e}")))?;
        let rate: f64 = if field(5).is_empty() {
            f64::NAN
        } else {
            field(5).parse().map_err(|e| bad("rate", format!("{:?}: {e}", field(5))))?
        };
        let aggressor = match field(6) {
            "L" | "l" => Aggressor::Lender,
            "B" | "b" => Aggressor::Borrower,
            "U" | "u" | "" => Aggressor::Unknown,
            other => return Err(bad("aggressor", format!("{other:?} is not one of L, B, U"))),
        };
        if !amount.is_positive() {
            return Err(IngestError::Rejected { line, reason: format!("amount {amount} must be positive") });
        }
        if lender == borrower {
            return Err(IngestError::Rejected { line, reason: format!("bank {lender} lends to itself") });
        }
        out.push(LoanTransaction { date, time, lender, borrower, amount, rate, aggressor });
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IngestError::Io(io),
        other => IngestError::Malformed { line, message: format!("{other:?}") },
    }
}

/// Writes transactions in the documented file format.
pub fn write_transactions<W: Write>(
    writer: W,
    txs: &[LoanTransaction],
    format: RecordFormat,
) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new().delimiter(format.delimiter).from_writer(writer);
    let io = |e: csv::Error| IngestError::Io(e.into());
    w.write_record(COLUMNS).map_err(io)?;
    for t in txs {
        let rate = if t.rate.is_nan() { String::new() } else { format!("{}", t.rate) };
        w.write_record([
            t.date.format("%Y-%m-%d").to_string(),
            t.time.format("%H:%M:%S").to_string(),
            t.lender.to_string(),
            t.borrower.to_string(),
            t.amount.to_string(),
            rate,
            t.aggressor.code().to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn group_by_day(txs: &[LoanTransaction]) -> BTreeMap<NaiveDate, Vec<&LoanTransaction>> {
    let mut days: BTreeMap<NaiveDate, Vec<&LoanTransaction>> = BTreeMap::new();
    for t in txs {
        days.entry(t.date).or_default().push(t);
    }
    days
}

/// One netted network per calendar date present in `txs`, in date order.
/// Days on which every trade nets out are kept as empty networks.
pub fn build_daily_networks(txs: &[LoanTransaction]) -> Result<Vec<DailyNetwork>, IngestError> {
    let days: Vec<(NaiveDate, Vec<&LoanTransaction>)> = group_by_day(txs).into_iter().collect();
    days.into_par_iter()
        .map(|(date, day)| {
            let gross: Vec<_> = day.iter().map(|t| (t.lender, t.borrower, t.amount)).collect();
            net_edges(date, &gross).map_err(|source| IngestError::Netting { date, source })
        })
        .collect()
}

/// Days on which a bank traded, with its gross trading volume `L + B`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActivityHistory {
    by_bank: BTreeMap<BankId, Vec<(NaiveDate, Money)>>,
}

/// Number of most recent active days averaged by [`ActivityHistory::rolling_volume`].
pub const VOLUME_WINDOW: usize = 10;

impl ActivityHistory {
    pub fn from_transactions(txs: &[LoanTransaction]) -> Self {
        let mut by_bank: BTreeMap<BankId, Vec<(NaiveDate, Money)>> = BTreeMap::new();
        for (date, day) in group_by_day(txs) {
            let mut volume: BTreeMap<BankId, Money> = BTreeMap::new();
            for t in day {
                *volume.entry(t.lender).or_default() += t.amount;
                *volume.entry(t.borrower).or_default() += t.amount;
            }
            for (bank, tv) in volume {
                by_bank.entry(bank).or_default().push((date, tv));
            }
        }
        ActivityHistory { by_bank }
    }

    pub fn entries(&self, bank: BankId) -> &[(NaiveDate, Money)] {
        self.by_bank.get(&bank).map_or(&[], Vec::as_slice)
    }

    pub fn banks(&self) -> impl Iterator<Item = BankId> + '_ {
        self.by_bank.keys().copied()
    }

    /// Mean daily trading volume over the bank's most recent active days up
    /// to and including `as_of`. Fewer than ten available days are averaged
    /// as they are.
    pub fn rolling_volume(&self, bank: BankId, as_of: NaiveDate) -> Result<f64, IngestError> {
        let entries = self.entries(bank);
        let end = entries.partition_point(|&(d, _)| d <= as_of);
        if end == 0 {
            return Err(IngestError::UndefinedHistory(bank));
        }
        let window = &entries[end.saturating_sub(VOLUME_WINDOW)..end];
        let total: i64 = window.iter().map(|(_, tv)| tv.units()).sum();
        Ok(Money::from_units(total).to_millions() / window.len() as f64)
    }
}

/// Free-function form of [`ActivityHistory::rolling_volume`].
pub fn rolling_volume(history: &ActivityHistory, bank: BankId, as_of: NaiveDate) -> Result<f64, IngestError> {
    history.rolling_volume(bank, as_of)
}
