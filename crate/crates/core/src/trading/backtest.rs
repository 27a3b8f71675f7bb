use std::io::Write;

use chrono::NaiveDate;
use nalgebra::DVector;

use super::{spread_weights, BacktestConfig, Side, SpreadWeights};
use crate::error::{CmarError, Result};
use crate::estimate::{fit, FitConfig};
use crate::linalg::vec;
use crate::series::MatrixSeries;

/// How positions are sized at open.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// `|β̂_i|` units of every portfolio, so the position value moves with the spread.
    Spread,
    /// One dollar long and one dollar short.
    EqualValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeEvent {
    pub open_date: NaiveDate,
    pub side: Side,
    pub close_date: NaiveDate,
    /// Closed on the last trading day rather than by the exit rule.
    pub forced_close: bool,
    pub spread_open: f64,
    pub spread_close: f64,
    pub mu: f64,
    pub sigma: f64,
    pub beta: Vec<f64>,
    /// Last date of the window the weights were fitted on.
    pub fitted_through: NaiveDate,
    pub trade_return: f64,
    pub cum_return: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeLog {
    pub strategy: Strategy,
    pub events: Vec<TradeEvent>,
    pub cumulative_return: f64,
    /// Some fitted weight vector had a single sign, leaving one leg empty.
    pub degenerate: bool,
    /// `(used from, fitted through)` for every estimation.
    pub fits: Vec<(NaiveDate, NaiveDate)>,
}

impl TradeLog {
    /// Every set of weights was fitted on data strictly before its first use,
    /// and every trade opened on or after the fit it used.
    pub fn audit_no_lookahead(&self) -> bool {
        self.fits.iter().all(|(used, through)| through < used)
            && self.events.iter().all(|e| e.fitted_through < e.open_date)
    }

    /// Trades never overlap and each one closes on or after it opens.
    pub fn is_well_formed(&self) -> bool {
        self.events.iter().all(|e| e.open_date <= e.close_date)
            && self.events.windows(2).all(|w| w[0].close_date <= w[1].open_date)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "open_date",
            "side",
            "close_date",
            "spread_open",
            "spread_close",
            "mu",
            "sigma",
            "trade_return",
            "cum_return",
        ])?;
        for e in &self.events {
            out.write_record([
                e.open_date.to_string(),
                e.side.as_str().to_string(),
                e.close_date.to_string(),
                e.spread_open.to_string(),
                e.spread_close.to_string(),
                e.mu.to_string(),
                e.sigma.to_string(),
                e.trade_return.to_string(),
                e.cum_return.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Parameters of the spread rule currently in force.
struct Regime {
    weights: SpreadWeights,
    mu: f64,
    sigma: f64,
    fitted_through: NaiveDate,
}

struct Open {
    t: usize,
    side: Side,
    spread: f64,
}

/// Sample mean and standard deviation (divisor `n − 1`).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs the spread rule with weights from `estimate`, which receives the
/// formation window and returns `β̂ = β̂₂ ⊗ β̂₁` for `vec(X_t)`.
pub fn backtest_with<F>(
    series: &MatrixSeries,
    cfg: &BacktestConfig,
    strategy: Strategy,
    mut estimate: F,
) -> Result<TradeLog>
where
    F: FnMut(&MatrixSeries) -> Result<DVector<f64>>,
{
    cfg.validate()?;
    let dates = series
        .index()
        .ok_or_else(|| CmarError::Config("backtest needs a dated series".into()))?;
    let first = dates
        .iter()
        .position(|d| *d >= cfg.trading_start)
        .ok_or_else(|| CmarError::Config("no data on or after the trading start".into()))?;
    let last = dates
        .iter()
        .rposition(|d| *d <= cfg.trading_end)
        .filter(|&l| l >= first)
        .ok_or_else(|| CmarError::Config("empty trading period".into()))?;
    if first < cfg.formation_days {
        return Err(CmarError::Config(format!(
            "{} observations before the trading start, {} needed for formation",
            first, cfg.formation_days
        )));
    }
    let x: Vec<DVector<f64>> = series.vectorized();
    let dim = x[0].len();
    let cost = cfg.cost_bps * 1e-4;

    let mut fits = Vec::new();
    let mut degenerate = false;
    let mut refit = |t: usize, fits: &mut Vec<(NaiveDate, NaiveDate)>| -> Result<Regime> {
        let window = series.slice(t - cfg.formation_days..t)?;
        let beta = estimate(&window)?;
        if beta.len() != dim {
            return Err(CmarError::Shape(format!(
                "weights of length {} for {dim} portfolios",
                beta.len()
            )));
        }
        let weights = spread_weights(&beta);
        degenerate |= weights.degenerate;
        let spreads: Vec<f64> = (t - cfg.formation_days..t).map(|s| beta.dot(&x[s])).collect();
        let (mu, sigma) = mean_std(&spreads);
        fits.push((dates[t], dates[t - 1]));
        Ok(Regime {
            weights,
            mu,
            sigma,
            fitted_through: dates[t - 1],
        })
    };

    let mut regime = refit(first, &mut fits)?;
    let mut position: Option<Open> = None;
    let mut events = Vec::new();
    let mut wealth = 1.0;

    for t in first..=last {
        let spread = regime.weights.beta.dot(&x[t]);
        let upper = regime.mu + cfg.s * regime.sigma;
        let lower = regime.mu - cfg.s * regime.sigma;
        if let Some(open) = &position {
            let exit = match open.side {
                Side::ShortSpread => spread <= lower,
                Side::LongSpread => spread >= upper,
            };
            if exit || t == last {
                let r = trade_return(strategy, &regime.weights, open, &x[open.t], &x[t], spread) - cost;
                wealth *= 1.0 + r;
                events.push(TradeEvent {
                    open_date: dates[open.t],
                    side: open.side,
                    close_date: dates[t],
                    forced_close: !exit,
                    spread_open: open.spread,
                    spread_close: spread,
                    mu: regime.mu,
                    sigma: regime.sigma,
                    beta: regime.weights.beta.iter().cloned().collect(),
                    fitted_through: regime.fitted_through,
                    trade_return: r,
                    cum_return: wealth - 1.0,
                });
                position = None;
                if t == last {
                    break;
                }
                regime = refit(t, &mut fits)?;
            } else {
                continue;
            }
        }
        if t == last {
            break;
        }
        let spread = regime.weights.beta.dot(&x[t]);
        let side = if spread >= regime.mu + cfg.s * regime.sigma {
            Some(Side::ShortSpread)
        } else if spread <= regime.mu - cfg.s * regime.sigma {
            Some(Side::LongSpread)
        } else {
            None
        };
        if let Some(side) = side {
            position = Some(Open { t, side, spread });
        }
    }

    Ok(TradeLog {
        strategy,
        events,
        cumulative_return: wealth - 1.0,
        degenerate,
        fits,
    })
}

/// Return of one round trip on the capital committed at open.
fn trade_return(
    strategy: Strategy,
    w: &SpreadWeights,
    open: &Open,
    x_open: &DVector<f64>,
    x_close: &DVector<f64>,
    spread_close: f64,
) -> f64 {
    let sign = match open.side {
        Side::LongSpread => 1.0,
        Side::ShortSpread => -1.0,
    };
    match strategy {
        Strategy::Spread => {
            let gross = w.plus.dot(x_open) + w.minus.dot(x_open);
            if gross > 0.0 {
                sign * (spread_close - open.spread) / gross
            } else {
                0.0
            }
        }
        Strategy::EqualValue => {
            let leg = |v: &DVector<f64>| {
                let start = v.dot(x_open);
                if start > 0.0 {
                    v.dot(x_close) / start - 1.0
                } else {
                    0.0
                }
            };
            let (long, short) = match open.side {
                Side::LongSpread => (leg(&w.plus), leg(&w.minus)),
                Side::ShortSpread => (leg(&w.minus), leg(&w.plus)),
            };
            (long - short) / 2.0
        }
    }
}

/// Weights `β̂₂ ⊗ β̂₁` from the configured estimator on one formation window.
pub fn fitted_weights(window: &MatrixSeries, cfg: &BacktestConfig) -> Result<DVector<f64>> {
    let fc = FitConfig::new(cfg.ranks, cfg.k, cfg.include_constant);
    let res = fit(window, cfg.method, &fc)?;
    Ok(vec(&res.model.beta()))
}

/// Spread strategy holding `|β̂_i|` units of each portfolio.
pub fn backtest(series: &MatrixSeries, cfg: &BacktestConfig) -> Result<TradeLog> {
    backtest_with(series, cfg, Strategy::Spread, |w| fitted_weights(w, cfg))
}

/// Same signals with one dollar in each leg.
pub fn backtest_equal_value(series: &MatrixSeries, cfg: &BacktestConfig) -> Result<TradeLog> {
    backtest_with(series, cfg, Strategy::EqualValue, |w| fitted_weights(w, cfg))
}
