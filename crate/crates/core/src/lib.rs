//! Cointegrated matrix autoregression.
//!
//! A `d1×d2` matrix series follows
//!
//! ```text
//! ΔX_t = A₁ X_{t−1} A₂' + Σ_{i=1}^k B_{i1} ΔX_{t−i} B_{i2}' + D + E_t,   A_j = α_j β_j',
//! ```
//!
//! so that `β₁' X_t β₂` is stationary while `X_t` itself is I(1). The crate
//! provides the model types ([`model`]), a simulator ([`simulate`]), the
//! alternating least-squares and maximum-likelihood estimators ([`estimate`]),
//! the vectorized error-correction baseline ([`cvar`]), error metrics and a
//! Monte Carlo harness ([`metrics`], [`montecarlo`]) and a pairs-trading
//! backtest driven by the fitted cointegrating vectors ([`trading`]).

pub mod cvar;
pub mod error;
pub mod estimate;
pub mod io;
pub mod json;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod montecarlo;
pub mod series;
pub mod simulate;
pub mod trading;

pub use error::{CmarError, Result};
pub use estimate::{fit, lse_fit, mle_fit, EstimationResult, FitConfig, Init, Method};
pub use model::{CmarModel, Dims, ErrorCovSpec, LagPair};
pub use series::MatrixSeries;
