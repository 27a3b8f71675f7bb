#![allow(dead_code)]

use cmar::model::{CmarModel, Dims};
use cmar::series::MatrixSeries;
use cmar::simulate::{gen_model, rng_from_seed, simulate_series, ErrorSetting, SimConfig};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rng_from_seed(seed)
}

pub fn uniform_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn dims(d1: usize, d2: usize, k: usize, r1: usize, r2: usize) -> Dims {
    Dims::new(d1, d2, k, r1, r2).unwrap()
}

pub fn model(dims: Dims, setting: ErrorSetting, constant: bool, seed: u64) -> CmarModel {
    let mut cfg = SimConfig::new(dims, dims.k + 2, setting, seed);
    cfg.include_constant = constant;
    gen_model(&cfg, &mut rng(seed)).unwrap()
}

/// Draws a model and one path of length `t` from the same seed.
pub fn simulated(dims: Dims, setting: ErrorSetting, constant: bool, t: usize, seed: u64) -> (CmarModel, MatrixSeries) {
    let m = model(dims, setting, constant, seed);
    let s = simulate_series(&m, t, &mut rng(seed ^ 0x5eed)).unwrap();
    (m, s)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Hand-traced trading scenarios on two assets `a = 10 + p`, `b = 10` with
/// weights `β = (1, −1)`, so the spread is `p`. The 60 formation days
/// alternate `p = ±1`: `μ̂ = 0`, `σ̂ = √(60/59)`.
pub mod scenarios {
    use chrono::{Duration, NaiveDate};
    use cmar::trading::{BacktestConfig, Side};
    use cmar::MatrixSeries;
    use nalgebra::{DMatrix, DVector};

    pub const FORMATION: usize = 60;

    pub fn day(i: usize) -> NaiveDate {
        NaiveDate::from_ymd_opt(2022, 1, 3).unwrap() + Duration::days(i as i64)
    }

    pub fn build(trading: &[f64]) -> (MatrixSeries, BacktestConfig) {
        let mut p: Vec<f64> = (0..FORMATION).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        p.extend_from_slice(trading);
        let values = p
            .iter()
            .map(|v| DMatrix::from_row_slice(1, 2, &[10.0 + v, 10.0]))
            .collect();
        let series = MatrixSeries::with_index(values, (0..p.len()).map(day).collect()).unwrap();
        let mut cfg = BacktestConfig::new(day(FORMATION), day(p.len() - 1), 1.0);
        cfg.formation_days = FORMATION;
        (series, cfg)
    }

    pub fn fixed_weights(_: &MatrixSeries) -> cmar::Result<DVector<f64>> {
        Ok(DVector::from_vec(vec![1.0, -1.0]))
    }

    pub struct Expected {
        pub open: usize,
        pub close: usize,
        pub side: Side,
        pub forced: bool,
        pub spread_return: f64,
        pub equal_value_return: f64,
        pub mu: f64,
        pub sigma: f64,
    }

    /// Short at 3.5 (above 0 + σ̂), closed at −1.01 (below −σ̂). The refit at the
    /// close gives μ̂ = 0.05, σ̂ = √(69.35/59) whose lower band −1.034 is not
    /// reached again, and the remaining zeros stay inside the band.
    pub fn round_trip() -> (Vec<f64>, Vec<Expected>) {
        let path = vec![0.0, 3.5, 0.5, -1.01, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let expected = vec![Expected {
            open: FORMATION + 1,
            close: FORMATION + 3,
            side: Side::ShortSpread,
            forced: false,
            // −(−1.01 − 3.5) / (13.5 + 10)
            spread_return: 4.51 / 23.5,
            // long b: 10 → 10, short a: 13.5 → 8.99
            equal_value_return: (0.0 - (8.99 / 13.5 - 1.0)) / 2.0,
            mu: 0.0,
            sigma: (60.0f64 / 59.0).sqrt(),
        }];
        (path, expected)
    }

    /// Long at −1.2, never reaching the upper band, closed on the last day at 0.9.
    pub fn forced_close() -> (Vec<f64>, Vec<Expected>) {
        let path = vec![0.0, 0.2, -1.2, -0.5, 0.0, 0.4, 0.6, 0.3, 0.8, 0.9];
        let expected = vec![Expected {
            open: FORMATION + 2,
            close: FORMATION + 9,
            side: Side::LongSpread,
            forced: true,
            // (0.9 − (−1.2)) / (8.8 + 10)
            spread_return: 2.1 / 18.8,
            // long a: 8.8 → 10.9, short b: 10 → 10
            equal_value_return: (10.9 / 8.8 - 1.0) / 2.0,
            mu: 0.0,
            sigma: (60.0f64 / 59.0).sqrt(),
        }];
        (path, expected)
    }
}
