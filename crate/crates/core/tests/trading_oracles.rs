mod common;

use chrono::NaiveDate;
use cmar::simulate::{simulate_series, ErrorSetting};
use cmar::trading::{
    backtest, backtest_equal_value, backtest_with, parse_ff_panel, write_ff_panel, BacktestConfig, PanelValues, Side,
    Strategy, TradeLog,
};
use cmar::MatrixSeries;
use common::scenarios::{self, day, fixed_weights, Expected, FORMATION};
use common::{dims, model, rng};

fn check(log: &TradeLog, expected: &[Expected], strategy: Strategy) {
    assert_eq!(log.events.len(), expected.len());
    let mut wealth = 1.0;
    for (e, x) in log.events.iter().zip(expected) {
        let r = match strategy {
            Strategy::Spread => x.spread_return,
            Strategy::EqualValue => x.equal_value_return,
        };
        assert_eq!(e.open_date, day(x.open));
        assert_eq!(e.close_date, day(x.close));
        assert_eq!(e.side, x.side);
        assert_eq!(e.forced_close, x.forced);
        assert!((e.trade_return - r).abs() < 1e-12, "{} vs {r}", e.trade_return);
        assert!((e.mu - x.mu).abs() < 1e-12);
        assert!((e.sigma - x.sigma).abs() < 1e-12);
        wealth *= 1.0 + r;
        assert!((e.cum_return - (wealth - 1.0)).abs() < 1e-12);
    }
    assert!((log.cumulative_return - (wealth - 1.0)).abs() < 1e-12);
    assert!(log.audit_no_lookahead());
    assert!(log.is_well_formed());
}

#[test]
fn round_trip_matches_hand_trace() {
    let (path, expected) = scenarios::round_trip();
    let (series, cfg) = scenarios::build(&path);
    for st in [Strategy::Spread, Strategy::EqualValue] {
        check(&backtest_with(&series, &cfg, st, fixed_weights).unwrap(), &expected, st);
    }
}

#[test]
fn forced_close_matches_hand_trace() {
    let (path, expected) = scenarios::forced_close();
    let (series, cfg) = scenarios::build(&path);
    for st in [Strategy::Spread, Strategy::EqualValue] {
        check(&backtest_with(&series, &cfg, st, fixed_weights).unwrap(), &expected, st);
    }
}

#[test]
fn close_and_reentry_on_the_same_day() {
    // the refit at the close (window mean 0.03, Σ(x−m)² = 58.486) still puts
    // −1.4 below the lower band, so a long opens at the same close
    let path = [0.0, 1.5, 0.5, -0.2, -1.4, 0.0, 0.3, 0.1, 0.2, 0.0];
    let (series, cfg) = scenarios::build(&path);
    let sigma0 = (60.0f64 / 59.0).sqrt();
    let sigma1 = (58.486f64 / 59.0).sqrt();
    let expected = vec![
        Expected {
            open: FORMATION + 1,
            close: FORMATION + 4,
            side: Side::ShortSpread,
            forced: false,
            spread_return: 2.9 / 21.5,
            equal_value_return: (2.9 / 11.5) / 2.0,
            mu: 0.0,
            sigma: sigma0,
        },
        Expected {
            open: FORMATION + 4,
            close: FORMATION + 9,
            side: Side::LongSpread,
            forced: true,
            spread_return: 1.4 / 18.6,
            equal_value_return: (1.4 / 8.6) / 2.0,
            mu: 0.03,
            sigma: sigma1,
        },
    ];
    for st in [Strategy::Spread, Strategy::EqualValue] {
        let log = backtest_with(&series, &cfg, st, fixed_weights).unwrap();
        check(&log, &expected, st);
        assert_eq!(log.fits.len(), 2);
    }
}

#[test]
fn cost_is_charged_once_per_round_trip() {
    let (path, expected) = scenarios::round_trip();
    let (series, mut cfg) = scenarios::build(&path);
    cfg.cost_bps = 10.0;
    let log = backtest_with(&series, &cfg, Strategy::Spread, fixed_weights).unwrap();
    assert!((log.events[0].trade_return - (expected[0].spread_return - 1e-3)).abs() < 1e-12);
}

#[test]
fn trade_log_csv_has_the_documented_columns() {
    let (path, _) = scenarios::round_trip();
    let (series, cfg) = scenarios::build(&path);
    let log = backtest_with(&series, &cfg, Strategy::Spread, fixed_weights).unwrap();
    let mut buf = Vec::new();
    log.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "open_date,side,close_date,spread_open,spread_close,mu,sigma,trade_return,cum_return"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], &["2022-03-05", "short-spread", "2022-03-07"]);
    assert!((row[4].parse::<f64>().unwrap() + 1.01).abs() < 1e-12);
    assert!(lines.next().is_none());
}

/// Simulated 5×5 cointegrated panel shifted to positive prices, dated daily.
fn simulated_panel(t: usize, seed: u64) -> MatrixSeries {
    let m = model(dims(5, 5, 1, 1, 1), ErrorSetting::II, false, seed);
    let s = simulate_series(&m, t, &mut rng(seed + 1)).unwrap();
    let start = NaiveDate::from_ymd_opt(2021, 1, 4).unwrap();
    let dates = (0..t).map(|i| start + chrono::Duration::days(i as i64)).collect();
    let values = s.values().iter().map(|x| x.map(|v| 200.0 + 0.5 * v)).collect();
    MatrixSeries::with_index(values, dates).unwrap()
}

#[test]
fn fitted_backtest_has_no_lookahead_and_shared_signals() {
    let series = simulated_panel(400, 3);
    let dates = series.index().unwrap();
    let mut cfg = BacktestConfig::new(dates[300], dates[399], 1.0);
    cfg.formation_days = 252;
    let spread = backtest(&series, &cfg).unwrap();
    let equal = backtest_equal_value(&series, &cfg).unwrap();
    assert!(spread.audit_no_lookahead() && equal.audit_no_lookahead());
    assert!(spread.is_well_formed());
    let signals = |l: &TradeLog| {
        l.events
            .iter()
            .map(|e| (e.open_date, e.close_date, e.side))
            .collect::<Vec<_>>()
    };
    assert_eq!(signals(&spread), signals(&equal));
    let compounded = spread.events.iter().fold(1.0, |w, e| w * (1.0 + e.trade_return)) - 1.0;
    assert!((spread.cumulative_return - compounded).abs() < 1e-12);
    for e in &spread.events {
        assert!(e.fitted_through < e.open_date);
    }
}

#[test]
fn panel_round_trip_is_lossless() {
    let series = simulated_panel(30, 8);
    let mut buf = Vec::new();
    write_ff_panel(&series, &mut buf).unwrap();
    let back = parse_ff_panel(std::str::from_utf8(&buf).unwrap(), PanelValues::Levels).unwrap();
    assert_eq!(back.series, series);
    assert!(back.dropped.is_empty());
}

#[test]
fn insufficient_formation_history_is_a_config_error() {
    let series = simulated_panel(100, 9);
    let dates = series.index().unwrap();
    let cfg = BacktestConfig::new(dates[50], dates[99], 1.0);
    assert!(matches!(backtest(&series, &cfg), Err(cmar::CmarError::Config(_))));
}
