//! Alternating estimators of the matrix error-correction model.
//!
//! Both estimators sweep a left half-step (`A₁`, `B_{·1}`, `D` given the right
//! factors) and a right half-step on the transposed series. [`lse_fit`]
//! minimizes the residual sum of squares; [`mle_fit`] maximizes the Gaussian
//! likelihood under `Cov(vec E_t) = Σ₂ ⊗ Σ₁`.

mod lse;
mod mle;
mod panel;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cvar::{cvar_fit, nearest_kronecker, CvarConfig};
use crate::error::{CmarError, Result};
use crate::linalg::{argmax_abs, eigen_floor, symmetrize, truncate_rank, vec_inverse};
use crate::model::{CmarModel, Dims, ErrorCovSpec, LagPair};
use crate::series::MatrixSeries;
use crate::simulate::{haar_semi_orthogonal, rng_from_seed, standard_normal_matrix};

pub use lse::{lse_fit, lse_objective, lse_update_left, lse_update_right};
pub use mle::{loglik, mle_fit, mle_update_left, mle_update_right, MleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "CVAR", alias = "cvar")]
    Cvar,
    #[serde(rename = "LSE", alias = "lse")]
    Lse,
    #[serde(rename = "MLE", alias = "mle")]
    Mle,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Cvar => "CVAR",
            Method::Lse => "LSE",
            Method::Mle => "MLE",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = CmarError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cvar" => Ok(Method::Cvar),
            "lse" => Ok(Method::Lse),
            "mle" => Ok(Method::Mle),
            other => Err(CmarError::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// Starting point of the alternating sweeps.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Vector error-correction fit with rank `r1·r2`, projected onto the
    /// nearest Kronecker products.
    CvarWarmStart,
    Random(u64),
    Provided(Box<CmarModel>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub ranks: (usize, usize),
    pub k: usize,
    pub include_constant: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub init: Init,
    /// MLE only: hold `Σ₁ = Σ₂ = I` instead of updating them.
    pub freeze_covariance: bool,
    /// Keep the raw coefficients after every sweep.
    pub record_iterates: bool,
}

impl FitConfig {
    pub fn new(ranks: (usize, usize), k: usize, include_constant: bool) -> Self {
        FitConfig {
            ranks,
            k,
            include_constant,
            tol: 1e-8,
            max_iter: 200,
            init: Init::CvarWarmStart,
            freeze_covariance: false,
            record_iterates: false,
        }
    }

    pub fn validate(&self, series: &MatrixSeries) -> Result<Dims> {
        if !(self.tol > 0.0) {
            return Err(CmarError::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(CmarError::Config("max_iter must be at least 1".into()));
        }
        let dims = Dims::new(series.d1(), series.d2(), self.k, self.ranks.0, self.ranks.1)?;
        if series.len() < self.k + 2 {
            return Err(CmarError::Config(format!(
                "series of length {} is too short for k = {}",
                series.len(),
                self.k
            )));
        }
        if let Init::Provided(m) = &self.init {
            if m.dims != dims {
                return Err(CmarError::Config(format!(
                    "initial model dims {:?} do not match the fit {:?}",
                    m.dims, dims
                )));
            }
        }
        Ok(dims)
    }
}

/// Raw (unnormalized) coefficients of one iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub b1: Vec<DMatrix<f64>>,
    pub b2: Vec<DMatrix<f64>>,
    pub d: DMatrix<f64>,
}

impl Coefficients {
    pub fn from_model(model: &CmarModel) -> Self {
        Coefficients {
            a1: model.a1(),
            a2: model.a2(),
            b1: model.lags.iter().map(|l| l.b1.clone()).collect(),
            b2: model.lags.iter().map(|l| l.b2.clone()).collect(),
            d: model.constant.clone(),
        }
    }

    pub fn to_model(&self, dims: Dims, error_cov: ErrorCovSpec) -> Result<CmarModel> {
        let lags: Vec<LagPair> = self
            .b1
            .iter()
            .zip(&self.b2)
            .map(|(b1, b2)| LagPair {
                b1: b1.clone(),
                b2: b2.clone(),
            })
            .collect();
        CmarModel::from_coefficients(dims, &self.a1, &self.a2, &lags, &self.d, error_cov)
    }

    /// Moves the scale of each factor pair into the right factor, leaving
    /// every product unchanged.
    fn rebalance(&mut self) {
        rebalance_pair(&mut self.a1, &mut self.a2);
        for (b1, b2) in self.b1.iter_mut().zip(self.b2.iter_mut()) {
            rebalance_pair(b1, b2);
        }
    }
}

fn rebalance_pair(left: &mut DMatrix<f64>, right: &mut DMatrix<f64>) {
    let n = left.norm();
    if n > 0.0 && n.is_finite() {
        *left /= n;
        *right *= n;
    }
}

/// Fitted model plus convergence diagnostics.
#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub model: CmarModel,
    pub iterations: usize,
    /// Objective at the start and after every sweep: residual sum of squares
    /// for LSE, log-likelihood for MLE.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    /// A ridge was added to some singular moment matrix.
    pub regularized: bool,
    /// A covariance iterate needed an eigenvalue floor.
    pub covariance_floored: bool,
    /// MLE covariance factors, `trace(Σ₂) = d2`.
    pub sigma1: Option<DMatrix<f64>>,
    pub sigma2: Option<DMatrix<f64>>,
    /// Raw coefficients after every sweep, when requested.
    pub iterates: Vec<Coefficients>,
}

impl EstimationResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial value")
    }
}

/// Dispatches to [`lse_fit`] or [`mle_fit`].
pub fn fit(series: &MatrixSeries, method: Method, cfg: &FitConfig) -> Result<EstimationResult> {
    match method {
        Method::Lse => lse_fit(series, cfg),
        Method::Mle => mle_fit(series, cfg),
        Method::Cvar => Err(CmarError::Config("the vector baseline is fitted with cvar_fit".into())),
    }
}

/// Starting coefficients and, for the warm start, covariance factors.
pub(crate) struct Start {
    pub coefs: Coefficients,
    pub sigmas: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

pub(crate) fn initial_values(series: &MatrixSeries, dims: Dims, cfg: &FitConfig) -> Result<Start> {
    let Dims { d1, d2, k, r1, r2 } = dims;
    match &cfg.init {
        Init::Provided(model) => {
            let sigmas = match &model.error_cov {
                ErrorCovSpec::Separable { sigma1, sigma2 } => Some((sigma1.clone(), sigma2.clone())),
                _ => None,
            };
            Ok(Start {
                coefs: Coefficients::from_model(model),
                sigmas,
            })
        }
        Init::Random(seed) => {
            let mut rng = rng_from_seed(*seed);
            let low_rank = |d: usize, r: usize, rng: &mut _| {
                let q1 = haar_semi_orthogonal(d, r, rng);
                let q2 = haar_semi_orthogonal(d, r, rng);
                q1 * q2.transpose()
            };
            let a1 = low_rank(d1, r1, &mut rng);
            let a2 = low_rank(d2, r2, &mut rng);
            let b1 = (0..k).map(|_| standard_normal_matrix(d1, d1, &mut rng) * 0.1).collect();
            let b2 = (0..k).map(|_| standard_normal_matrix(d2, d2, &mut rng)).collect();
            Ok(Start {
                coefs: Coefficients {
                    a1,
                    a2,
                    b1,
                    b2,
                    d: DMatrix::zeros(d1, d2),
                },
                sigmas: None,
            })
        }
        Init::CvarWarmStart => warm_start(series, dims, cfg.include_constant),
    }
}

fn warm_start(series: &MatrixSeries, dims: Dims, constant: bool) -> Result<Start> {
    let Dims { d1, d2, k, r1, r2 } = dims;
    let cvar = cvar_fit(&series.vectorized(), &CvarConfig::new(r1 * r2, k, constant))?;
    let pi = nearest_kronecker(&cvar.pi(), d1, d2)?;
    let mut a1 = truncate_rank(&pi.inner, r1);
    let mut a2 = truncate_rank(&pi.outer, r2);
    if a1.norm() == 0.0 || a2.norm() == 0.0 {
        // degenerate Π̂: fall back to the leading directions of the identity
        a1 = DMatrix::from_fn(d1, d1, |i, j| if i == j && i < r1 { 1.0 } else { 0.0 });
        a2 = DMatrix::from_fn(d2, d2, |i, j| if i == j && i < r2 { 1.0 } else { 0.0 });
    }
    let mut b1 = Vec::with_capacity(k);
    let mut b2 = Vec::with_capacity(k);
    for g in &cvar.gamma {
        let f = nearest_kronecker(g, d1, d2)?;
        b1.push(f.inner);
        b2.push(f.outer);
    }
    let d = vec_inverse(&nalgebra::DVector::from_vec(cvar.d_const.clone()), d1, d2)?;
    let sigmas = nearest_kronecker(&cvar.sigma, d1, d2)
        .ok()
        .map(|f| separable_factors(&f.inner, &f.outer));
    Ok(Start {
        coefs: Coefficients { a1, a2, b1, b2, d },
        sigmas,
    })
}

/// Turns a rank-one Kronecker factor pair into SPD factors with `trace(Σ₂) = d2`.
fn separable_factors(inner: &DMatrix<f64>, outer: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut s1 = symmetrize(inner);
    let mut s2 = symmetrize(outer);
    if let Some(i) = argmax_abs(s1.diagonal().as_slice().iter()) {
        if s1[(i, i)] < 0.0 {
            s1.neg_mut();
            s2.neg_mut();
        }
    }
    let floor = |m: &DMatrix<f64>| {
        let scale = m.diagonal().amax().max(f64::MIN_POSITIVE);
        eigen_floor(m, 1e-6 * scale).0
    };
    normalize_sigmas(floor(&s1), floor(&s2))
}

/// Rescales the pair so that `trace(Σ₂) = d2`, moving the scale into `Σ₁`.
pub(crate) fn normalize_sigmas(s1: DMatrix<f64>, s2: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let c = s2.trace() / s2.nrows() as f64;
    if c > 0.0 && c.is_finite() {
        (s1 * c, s2 / c)
    } else {
        (s1, s2)
    }
}

/// Relative change between successive objective values.
pub(crate) fn relative_change(old: f64, new: f64) -> f64 {
    (new - old).abs() / old.abs().max(f64::MIN_POSITIVE)
}
