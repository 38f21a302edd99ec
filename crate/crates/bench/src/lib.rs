//! Shared fixtures for the benchmarks: the busiest day of a synthetic
//! market together with its baseline balance sheets.

use interbank_core::balance::sheets_for_network;
use interbank_core::experiment::MarketData;
use interbank_core::synth::generate_market;
use interbank_core::{BalanceSheet, DailyNetwork, MarketPreset, Params, SheetPolicy};

pub struct Fixture {
    pub network: DailyNetwork,
    pub sheets: Vec<BalanceSheet>,
}

/// Busiest of the first `days` trading days of `preset`.
pub fn busiest_day(mut preset: MarketPreset, days: usize) -> Fixture {
    preset.n_days = days;
    let txs = generate_market(&preset).expect("preset is valid");
    let data = MarketData::from_transactions(&txs).expect("synthetic data is well formed");
    let network = data
        .networks
        .iter()
        .max_by_key(|n| (n.edge_count(), std::cmp::Reverse(n.date())))
        .expect("at least one day")
        .clone();
    let date = network.date();
    let sheets = sheets_for_network(
        &network,
        |i| data.history.rolling_volume(network.bank(i), date).expect("bank traded"),
        Params::default(),
        SheetPolicy::Clamp,
    )
    .expect("clamped sheets always exist");
    Fixture { network, sheets }
}
