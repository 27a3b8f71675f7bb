//! Random CMAR models and simulated I(1) matrix paths.
//!
//! Coefficients follow the low-rank recipe `A_j = Q₁ Λ Q₂'` with Haar
//! semi-orthogonal `Q`s and absolute-normal `Λ`; draws whose stationary
//! companion matrix has spectral radius at or above [`STABILITY_BOUND`] are
//! rejected and redrawn.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CmarError, Result};
use crate::linalg::{spd_sqrt, spectral_radius, symmetrize, vec_inverse};
use crate::model::{CmarModel, Dims, ErrorCovSpec, LagPair};
use crate::series::MatrixSeries;

pub const STABILITY_BOUND: f64 = 0.98;

/// Error covariance design for simulated data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorSetting {
    /// Dense `QΛQ'`, eigenvalues equally spaced on `[1, 10]`.
    #[serde(rename = "I")]
    I,
    /// Separable `Σ₂ ⊗ Σ₁`, factor eigenvalues equally spaced on `[1, 5]`.
    #[serde(rename = "II")]
    II,
    Identity,
}

impl std::str::FromStr for ErrorSetting {
    type Err = CmarError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "1" => Ok(ErrorSetting::I),
            "II" | "2" => Ok(ErrorSetting::II),
            "identity" | "Identity" => Ok(ErrorSetting::Identity),
            other => Err(CmarError::Config(format!("unknown error setting {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dims: Dims,
    pub t: usize,
    pub error_setting: ErrorSetting,
    pub include_constant: bool,
    #[serde(default = "default_constant_norm")]
    pub constant_norm: f64,
    pub seed: u64,
    #[serde(default = "default_max_rejection")]
    pub max_rejection: usize,
}

fn default_constant_norm() -> f64 {
    0.8
}

fn default_max_rejection() -> usize {
    1000
}

impl SimConfig {
    pub fn new(dims: Dims, t: usize, error_setting: ErrorSetting, seed: u64) -> Self {
        SimConfig {
            dims,
            t,
            error_setting,
            include_constant: false,
            constant_norm: default_constant_norm(),
            seed,
            max_rejection: default_max_rejection(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.t < self.dims.k + 2 {
            return Err(CmarError::Config(format!(
                "T = {} is too short for k = {}",
                self.t, self.dims.k
            )));
        }
        if !(self.constant_norm >= 0.0) {
            return Err(CmarError::Config("constant norm must be non-negative".into()));
        }
        Ok(())
    }
}

/// Seeded generator used throughout the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `d×r` matrix with orthonormal columns drawn from the Haar measure:
/// QR of a Gaussian matrix with the columns of `Q` multiplied by `sign(R_jj)`.
pub fn haar_semi_orthogonal<R: Rng + ?Sized>(d: usize, r: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(r <= d, "haar_semi_orthogonal needs r <= d");
    let g = standard_normal_matrix(d, r, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let rr = qr.r();
    for j in 0..r {
        if rr[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `Q₁ Λ Q₂'` with `d×r` Haar factors and IID `|N(0,1)|` diagonal `Λ`.
fn low_rank_draw<R: Rng + ?Sized>(d: usize, r: usize, rng: &mut R) -> DMatrix<f64> {
    let q1 = haar_semi_orthogonal(d, r, rng);
    let q2 = haar_semi_orthogonal(d, r, rng);
    let lambda: Vec<f64> = (0..r).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).collect();
    let scaled = DMatrix::from_fn(d, r, |i, j| q1[(i, j)] * lambda[j]);
    scaled * q2.transpose()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// `Q diag(linspace(lo, hi, d)) Q'` with Haar `Q`.
pub fn spaced_spectrum_cov<R: Rng + ?Sized>(d: usize, lo: f64, hi: f64, rng: &mut R) -> DMatrix<f64> {
    let q = haar_semi_orthogonal(d, d, rng);
    let vals = linspace(lo, hi, d);
    let scaled = DMatrix::from_fn(d, d, |i, j| q[(i, j)] * vals[j]);
    symmetrize(&(scaled * q.transpose()))
}

pub fn gen_error_cov<R: Rng + ?Sized>(setting: ErrorSetting, d1: usize, d2: usize, rng: &mut R) -> ErrorCovSpec {
    match setting {
        ErrorSetting::I => ErrorCovSpec::Dense {
            sigma: spaced_spectrum_cov(d1 * d2, 1.0, 10.0, rng),
        },
        ErrorSetting::II => {
            let sigma1 = spaced_spectrum_cov(d1, 1.0, 5.0, rng);
            let sigma2 = spaced_spectrum_cov(d2, 1.0, 5.0, rng);
            ErrorCovSpec::Separable { sigma1, sigma2 }
        }
        ErrorSetting::Identity => ErrorCovSpec::Identity,
    }
}

/// Draws a normalized model whose companion spectral radius is below
/// [`STABILITY_BOUND`].
pub fn gen_model<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<CmarModel> {
    cfg.validate()?;
    let Dims { d1, d2, k, r1, r2 } = cfg.dims;
    for _ in 0..cfg.max_rejection {
        let a1 = low_rank_draw(d1, r1, rng);
        let a2 = low_rank_draw(d2, r2, rng);
        let lags: Vec<LagPair> = (0..k)
            .map(|_| LagPair {
                b1: low_rank_draw(d1, d1, rng),
                b2: low_rank_draw(d2, d2, rng),
            })
            .collect();
        let constant = if cfg.include_constant && cfg.constant_norm > 0.0 {
            let raw = standard_normal_matrix(d1, d2, rng);
            &raw * (cfg.constant_norm / raw.norm())
        } else {
            DMatrix::zeros(d1, d2)
        };
        let model = CmarModel::from_coefficients(cfg.dims, &a1, &a2, &lags, &constant, ErrorCovSpec::Identity)?;
        if spectral_radius(&model.companion_matrix())? < STABILITY_BOUND {
            let error_cov = gen_error_cov(cfg.error_setting, d1, d2, rng);
            return Ok(CmarModel { error_cov, ..model });
        }
    }
    Err(CmarError::Generation(cfg.max_rejection))
}

/// Draws `t` error matrices with `Cov(vec E) = cov`.
pub fn draw_errors<R: Rng + ?Sized>(
    cov: &ErrorCovSpec,
    d1: usize,
    d2: usize,
    t: usize,
    rng: &mut R,
) -> Result<Vec<DMatrix<f64>>> {
    cov.validate(d1, d2)?;
    match cov {
        ErrorCovSpec::Identity => Ok((0..t).map(|_| standard_normal_matrix(d1, d2, rng)).collect()),
        ErrorCovSpec::Separable { sigma1, sigma2 } => {
            // vec(S₁ Z S₂) = (S₂ ⊗ S₁) vec Z and (Σ₂⊗Σ₁)^{1/2} = Σ₂^{1/2} ⊗ Σ₁^{1/2}
            let s1 = spd_sqrt(sigma1)?;
            let s2 = spd_sqrt(sigma2)?;
            Ok((0..t)
                .map(|_| &s1 * standard_normal_matrix(d1, d2, rng) * &s2)
                .collect())
        }
        ErrorCovSpec::Dense { sigma } => {
            let s = spd_sqrt(sigma)?;
            (0..t)
                .map(|_| {
                    let z = standard_normal_matrix(d1 * d2, 1, rng);
                    vec_inverse(&(&s * z).column(0).into_owned(), d1, d2)
                })
                .collect()
        }
    }
}

/// Runs the recursion from `X_0 = … = X_{−k} = 0` and returns `X_1..X_T`.
pub fn simulate_series<R: Rng + ?Sized>(model: &CmarModel, t: usize, rng: &mut R) -> Result<MatrixSeries> {
    simulate_scaled(model, t, 1.0, rng)
}

/// As [`simulate_series`] with every error matrix multiplied by `noise_scale`
/// (`0` gives the deterministic path).
pub fn simulate_scaled<R: Rng + ?Sized>(
    model: &CmarModel,
    t: usize,
    noise_scale: f64,
    rng: &mut R,
) -> Result<MatrixSeries> {
    let Dims { d1, d2, k, .. } = model.dims;
    if t < k + 2 {
        return Err(CmarError::Config(format!("T = {t} is too short for k = {k}")));
    }
    let mut errors = draw_errors(&model.error_cov, d1, d2, t, rng)?;
    if noise_scale != 1.0 {
        errors.iter_mut().for_each(|e| *e *= noise_scale);
    }
    simulate_with_errors(model, &[], &errors)
}

/// Deterministic recursion driven by the supplied errors `E_1..E_T`.
///
/// `initial` lists `X_0, X_{−1}, …, X_{−k}`; missing entries are zero.
pub fn simulate_with_errors(
    model: &CmarModel,
    initial: &[DMatrix<f64>],
    errors: &[DMatrix<f64>],
) -> Result<MatrixSeries> {
    let Dims { d1, d2, k, .. } = model.dims;
    if initial.len() > k + 1 {
        return Err(CmarError::Shape(format!(
            "{} initial values for k = {k}",
            initial.len()
        )));
    }
    let mut pre: Vec<DMatrix<f64>> = (0..=k)
        .map(|i| initial.get(i).cloned().unwrap_or_else(|| DMatrix::zeros(d1, d2)))
        .collect();
    if let Some(m) = pre.iter().chain(errors).find(|m| m.shape() != (d1, d2)) {
        return Err(CmarError::Shape(format!(
            "recursion input is {}x{}, expected {d1}x{d2}",
            m.nrows(),
            m.ncols()
        )));
    }
    // pre = [X_0, X_{-1}, ..., X_{-k}]; lagged differences, most recent first
    pre.reverse();
    let mut diffs: Vec<DMatrix<f64>> = pre.windows(2).map(|w| &w[1] - &w[0]).rev().collect();
    let a1 = model.a1();
    let a2t = model.a2().transpose();
    let lag_terms: Vec<(DMatrix<f64>, DMatrix<f64>)> =
        model.lags.iter().map(|l| (l.b1.clone(), l.b2.transpose())).collect();

    let mut level = pre.last().cloned().unwrap_or_else(|| DMatrix::zeros(d1, d2));
    let mut out = Vec::with_capacity(errors.len());
    for e in errors {
        let mut delta = &a1 * &level * &a2t + &model.constant + e;
        for (i, (b1, b2t)) in lag_terms.iter().enumerate() {
            delta += b1 * &diffs[i] * b2t;
        }
        level += &delta;
        if k > 0 {
            diffs.pop();
            diffs.insert(0, delta);
        }
        out.push(level.clone());
    }
    MatrixSeries::new(out)
}
