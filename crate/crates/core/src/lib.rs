//! Interbank default-cascade simulation.
//!
//! Daily loan trades are netted into directed weighted networks
//! ([`network`]), each active bank gets a stylised balance sheet derived from
//! its trading volume ([`balance`]), and every borrowing bank in turn is
//! defaulted to measure the knock-on defaults it causes ([`cascade`]).
//! [`nullmodel`] builds randomised reference networks, [`centrality`] the
//! structural measures used to explain cascade sizes, [`synth`] synthetic
//! markets to run on, and [`experiment`] drives the full simulation matrix.

pub mod balance;
pub mod cascade;
pub mod centrality;
pub mod experiment;
pub mod ingest;
pub mod money;
pub mod network;
pub mod nullmodel;
pub mod seeding;
pub mod synth;

pub use balance::{make_balance_sheet, BalanceSheet, Params, SheetPolicy};
pub use cascade::{classify_cascade, run_cascade, CascadeResult, CascadeState, Measure};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentError, InputSource, RunRecord};
pub use ingest::LoanTransaction;
pub use money::Money;
pub use network::{net_edges, BankId, DailyNetwork, Degree, Edge};
pub use nullmodel::NullModelKind;
pub use synth::MarketPreset;
