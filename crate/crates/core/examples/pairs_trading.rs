//! Rolling pairs trade on a simulated 5×5 price panel, spread-weighted and equal-value.
//! Pass a Fama-French 25-portfolio daily file to trade it instead:
//! `cargo run --example pairs_trading -- 25_Portfolios_5x5_Daily.csv`.

use chrono::NaiveDate;
use cmar::simulate::{gen_model, rng_from_seed, simulate_series, ErrorSetting, SimConfig};
use cmar::trading::{backtest, backtest_equal_value, load_ff_panel, BacktestConfig, PanelValues};
use cmar::{Dims, MatrixSeries};

fn simulated_prices() -> cmar::Result<MatrixSeries> {
    let cfg = SimConfig::new(Dims::new(5, 5, 1, 1, 1)?, 400, ErrorSetting::II, 3);
    let mut rng = rng_from_seed(cfg.seed);
    let model = gen_model(&cfg, &mut rng)?;
    let raw = simulate_series(&model, cfg.t, &mut rng)?;
    let start = NaiveDate::from_ymd_opt(2021, 7, 1).unwrap();
    let dates = (0..cfg.t).map(|i| start + chrono::Duration::days(i as i64)).collect();
    let prices = raw.values().iter().map(|x| x.map(|v| 200.0 + 0.5 * v)).collect();
    MatrixSeries::with_index(prices, dates)
}

fn main() -> cmar::Result<()> {
    let series = match std::env::args().nth(1) {
        Some(path) => load_ff_panel(path, PanelValues::PercentReturns)?.series,
        None => simulated_prices()?,
    };
    let dates = series.index().unwrap();
    let (start, end) = match std::env::args().nth(1) {
        Some(_) => (
            NaiveDate::from_ymd_opt(2022, 7, 1).unwrap(),
            NaiveDate::from_ymd_opt(2022, 12, 30).unwrap(),
        ),
        None => (dates[300], dates[399]),
    };
    let cfg = BacktestConfig::new(start, end, 1.0);
    let spread = backtest(&series, &cfg)?;
    let equal = backtest_equal_value(&series, &cfg)?;
    for e in &spread.events {
        println!(
            "{} {:<12} -> {}{}  return {:+.4}",
            e.open_date,
            e.side.as_str(),
            e.close_date,
            if e.forced_close { " (forced)" } else { "" },
            e.trade_return
        );
    }
    println!("spread strategy     {:+.3}%", 100.0 * spread.cumulative_return);
    println!("equal-value legs    {:+.3}%", 100.0 * equal.cumulative_return);
    println!(
        "no look-ahead       {}",
        spread.audit_no_lookahead() && equal.audit_no_lookahead()
    );
    Ok(())
}
