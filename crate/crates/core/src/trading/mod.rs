//! Pairs trading on the spread `β̂'vec(X_t)` with `β̂ = β̂₂ ⊗ β̂₁`.
//!
//! A position opens when the spread leaves the band `μ̂ ± sσ̂` estimated on
//! the trailing formation window and closes when it reaches the opposite
//! side. Weights and band are re-estimated at every close; anything still open
//! on the last day is closed at that day's prices.

mod backtest;
mod data;

use chrono::NaiveDate;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CmarError, Result};
use crate::estimate::Method;

pub use backtest::{
    backtest, backtest_equal_value, backtest_with, fitted_weights, mean_std, Strategy, TradeEvent, TradeLog,
};
pub use data::{load_ff_panel, parse_ff_panel, write_ff_panel, FfPanel, PanelValues};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Long `β̂₊` units, short `β̂₋` units: profits when the spread rises.
    LongSpread,
    /// Long `β̂₋` units, short `β̂₊` units: profits when the spread falls.
    ShortSpread,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::LongSpread => "long-spread",
            Side::ShortSpread => "short-spread",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub formation_days: usize,
    pub s: f64,
    pub ranks: (usize, usize),
    pub k: usize,
    pub include_constant: bool,
    pub method: Method,
    pub trading_start: NaiveDate,
    pub trading_end: NaiveDate,
    /// Cost charged on every round trip, in basis points of the committed capital.
    pub cost_bps: f64,
}

impl BacktestConfig {
    pub fn new(trading_start: NaiveDate, trading_end: NaiveDate, s: f64) -> Self {
        BacktestConfig {
            formation_days: 252,
            s,
            ranks: (1, 1),
            k: 1,
            include_constant: true,
            method: Method::Mle,
            trading_start,
            trading_end,
            cost_bps: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0) {
            return Err(CmarError::Config(format!(
                "threshold s must be positive, got {}",
                self.s
            )));
        }
        if self.formation_days < 60 {
            return Err(CmarError::Config(format!(
                "formation window of {} days is below the minimum of 60",
                self.formation_days
            )));
        }
        if self.trading_end < self.trading_start {
            return Err(CmarError::Config("trading end precedes trading start".into()));
        }
        if !(self.cost_bps >= 0.0) {
            return Err(CmarError::Config("cost_bps must be non-negative".into()));
        }
        if self.method == Method::Cvar {
            return Err(CmarError::Config("backtest weights come from LSE or MLE".into()));
        }
        Ok(())
    }
}

/// Spread weights split into their positive and negative parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadWeights {
    pub beta: DVector<f64>,
    pub plus: DVector<f64>,
    pub minus: DVector<f64>,
    /// All weights share one sign, so one leg is empty.
    pub degenerate: bool,
}

/// `β₊ = max(β, 0)`, `β₋ = max(−β, 0)`.
pub fn spread_weights(beta: &DVector<f64>) -> SpreadWeights {
    let plus = beta.map(|b| b.max(0.0));
    let minus = beta.map(|b| (-b).max(0.0));
    let degenerate = plus.iter().all(|&v| v == 0.0) || minus.iter().all(|&v| v == 0.0);
    SpreadWeights {
        beta: beta.clone(),
        plus,
        minus,
        degenerate,
    }
}
