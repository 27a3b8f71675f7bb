//! Model parameters, the identifiability normalization, and the root structure
//! (stationary companion form, unit-root count) of a CMAR process
//!
//! ```text
//! ΔX_t = A₁ X_{t−1} A₂' + Σ_i B_{i1} ΔX_{t−i} B_{i2}' + D + E_t,   A_j = α_j β_j'.
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CmarError, Result};
use crate::json;
use crate::linalg::{argmax_abs, kron, low_rank_factors, numerical_rank, sym_eigen_desc};

/// Default tolerance `|λ − 1|` for counting unit roots.
pub const UNIT_ROOT_TOL: f64 = 1e-6;

/// Dimensions, lag order and cointegration ranks of a CMAR model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub d1: usize,
    pub d2: usize,
    pub k: usize,
    pub r1: usize,
    pub r2: usize,
}

impl Dims {
    pub fn new(d1: usize, d2: usize, k: usize, r1: usize, r2: usize) -> Result<Self> {
        let dims = Dims { d1, d2, k, r1, r2 };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d1 == 0 || self.d2 == 0 {
            return Err(CmarError::Config(format!(
                "dimensions must be positive, got {}x{}",
                self.d1, self.d2
            )));
        }
        if self.r1 == 0 || self.r1 > self.d1 || self.r2 == 0 || self.r2 > self.d2 {
            return Err(CmarError::Config(format!(
                "ranks ({}, {}) must satisfy 0 < r_i <= d_i for dims {}x{}",
                self.r1, self.r2, self.d1, self.d2
            )));
        }
        Ok(())
    }

    /// Dimension of the vectorized process.
    pub fn dim(&self) -> usize {
        self.d1 * self.d2
    }

    /// Cointegration rank of the vectorized process.
    pub fn rank(&self) -> usize {
        self.r1 * self.r2
    }
}

/// Covariance of `vec(E_t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorCovSpec {
    /// Unstructured `d1d2 × d1d2` covariance.
    Dense {
        #[serde(with = "json::matrix")]
        sigma: DMatrix<f64>,
    },
    /// Separable covariance `Σ₂ ⊗ Σ₁`.
    Separable {
        #[serde(with = "json::matrix")]
        sigma1: DMatrix<f64>,
        #[serde(with = "json::matrix")]
        sigma2: DMatrix<f64>,
    },
    Identity,
}

fn check_spd(m: &DMatrix<f64>, n: usize, what: &str) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(CmarError::Shape(format!(
            "{what} is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(CmarError::Covariance(format!("{what} is not symmetric")));
    }
    let (vals, _) = sym_eigen_desc(m);
    if vals.iter().any(|&v| !(v > 0.0)) {
        return Err(CmarError::Covariance(format!(
            "{what} has non-positive eigenvalue {:e}",
            vals[n - 1]
        )));
    }
    Ok(())
}

impl ErrorCovSpec {
    pub fn validate(&self, d1: usize, d2: usize) -> Result<()> {
        match self {
            ErrorCovSpec::Dense { sigma } => check_spd(sigma, d1 * d2, "Σ_e"),
            ErrorCovSpec::Separable { sigma1, sigma2 } => {
                check_spd(sigma1, d1, "Σ₁")?;
                check_spd(sigma2, d2, "Σ₂")
            }
            ErrorCovSpec::Identity => Ok(()),
        }
    }

    /// The full `d1d2 × d1d2` covariance matrix.
    pub fn full(&self, d1: usize, d2: usize) -> DMatrix<f64> {
        match self {
            ErrorCovSpec::Dense { sigma } => sigma.clone(),
            ErrorCovSpec::Separable { sigma1, sigma2 } => kron(sigma2, sigma1),
            ErrorCovSpec::Identity => DMatrix::identity(d1 * d2, d1 * d2),
        }
    }
}

/// One lagged-difference term `B_{i1} ΔX_{t−i} B_{i2}'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagPair {
    #[serde(with = "json::matrix")]
    pub b1: DMatrix<f64>,
    #[serde(with = "json::matrix")]
    pub b2: DMatrix<f64>,
}

impl LagPair {
    /// `B_{i2} ⊗ B_{i1}`, the coefficient of the vectorized lag.
    pub fn kron(&self) -> DMatrix<f64> {
        kron(&self.b2, &self.b1)
    }
}

/// Full CMAR parameter set in normalized form.
///
/// Invariants: `β_j'β_j = I`, `‖α₁β₁'‖_F = 1`, `‖B_{i1}‖_F = 1` (unless the lag
/// term vanishes), the largest-magnitude entry of every `β_j` column and of
/// `A₁` and each `B_{i1}` is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmarModel {
    pub dims: Dims,
    #[serde(with = "json::matrix")]
    pub alpha1: DMatrix<f64>,
    #[serde(with = "json::matrix")]
    pub beta1: DMatrix<f64>,
    #[serde(with = "json::matrix")]
    pub alpha2: DMatrix<f64>,
    #[serde(with = "json::matrix")]
    pub beta2: DMatrix<f64>,
    pub lags: Vec<LagPair>,
    #[serde(with = "json::matrix")]
    pub constant: DMatrix<f64>,
    pub error_cov: ErrorCovSpec,
}

/// Scales `(a, b)` so that `‖a‖_F = 1` with the scale moved into `b`, and flips
/// both so the largest-magnitude entry of `a` is positive.
fn balance_pair(a: &mut DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = a.norm();
    if n == 0.0 {
        b.fill(0.0);
        return;
    }
    *a /= n;
    *b *= n;
    if let Some(idx) = argmax_abs(a.as_slice().iter()) {
        if a.as_slice()[idx] < 0.0 {
            a.neg_mut();
            b.neg_mut();
        }
    }
}

impl CmarModel {
    /// Builds a normalized model from raw coefficient matrices. `a1` and `a2`
    /// are truncated to ranks `r1`, `r2`.
    pub fn from_coefficients(
        dims: Dims,
        a1: &DMatrix<f64>,
        a2: &DMatrix<f64>,
        lags: &[LagPair],
        constant: &DMatrix<f64>,
        error_cov: ErrorCovSpec,
    ) -> Result<Self> {
        dims.validate()?;
        let Dims { d1, d2, k, r1, r2 } = dims;
        let shape_err = |what: &str, m: &DMatrix<f64>, r: usize, c: usize| {
            CmarError::Shape(format!("{what} is {}x{}, expected {r}x{c}", m.nrows(), m.ncols()))
        };
        if a1.shape() != (d1, d1) {
            return Err(shape_err("A1", a1, d1, d1));
        }
        if a2.shape() != (d2, d2) {
            return Err(shape_err("A2", a2, d2, d2));
        }
        if constant.shape() != (d1, d2) {
            return Err(shape_err("D", constant, d1, d2));
        }
        if lags.len() != k {
            return Err(CmarError::Shape(format!(
                "{} lag pairs supplied for k = {k}",
                lags.len()
            )));
        }
        if numerical_rank(a1) < r1 || numerical_rank(a2) < r2 {
            return Err(CmarError::Singular(format!(
                "coefficient ranks ({}, {}) below cointegration ranks ({r1}, {r2})",
                numerical_rank(a1),
                numerical_rank(a2)
            )));
        }
        let mut a1 = a1.clone();
        let mut a2 = a2.clone();
        balance_pair(&mut a1, &mut a2);
        let (alpha1, beta1) = low_rank_factors(&a1, r1);
        let (alpha2, beta2) = low_rank_factors(&a2, r2);

        let mut norm_lags = Vec::with_capacity(k);
        for lag in lags {
            if lag.b1.shape() != (d1, d1) {
                return Err(shape_err("B_i1", &lag.b1, d1, d1));
            }
            if lag.b2.shape() != (d2, d2) {
                return Err(shape_err("B_i2", &lag.b2, d2, d2));
            }
            let mut b1 = lag.b1.clone();
            let mut b2 = lag.b2.clone();
            balance_pair(&mut b1, &mut b2);
            norm_lags.push(LagPair { b1, b2 });
        }
        error_cov.validate(d1, d2)?;
        Ok(CmarModel {
            dims,
            alpha1,
            beta1,
            alpha2,
            beta2,
            lags: norm_lags,
            constant: constant.clone(),
            error_cov,
        })
    }

    /// Re-applies the normalization; a no-op (to rounding) on normalized input.
    pub fn normalize(&self) -> Result<Self> {
        Self::from_coefficients(
            self.dims,
            &self.a1(),
            &self.a2(),
            &self.lags,
            &self.constant,
            self.error_cov.clone(),
        )
    }

    pub fn a1(&self) -> DMatrix<f64> {
        &self.alpha1 * self.beta1.transpose()
    }

    pub fn a2(&self) -> DMatrix<f64> {
        &self.alpha2 * self.beta2.transpose()
    }

    /// `Π = A₂ ⊗ A₁`.
    pub fn pi(&self) -> DMatrix<f64> {
        kron(&self.a2(), &self.a1())
    }

    /// `β = β₂ ⊗ β₁`, the cointegrating vectors of `vec(X_t)`.
    pub fn beta(&self) -> DMatrix<f64> {
        kron(&self.beta2, &self.beta1)
    }

    pub fn alpha(&self) -> DMatrix<f64> {
        kron(&self.alpha2, &self.alpha1)
    }

    /// Lagged-difference coefficients `Γ_i = B_{i2} ⊗ B_{i1}` of the vectorized model.
    pub fn gammas(&self) -> Vec<DMatrix<f64>> {
        self.lags.iter().map(LagPair::kron).collect()
    }

    /// Transition matrix of the stationary state
    /// `(β'vec X_t, Δvec X_t, …, Δvec X_{t−k+1})`.
    pub fn companion_matrix(&self) -> DMatrix<f64> {
        let r = self.dims.rank();
        let d = self.dims.dim();
        let k = self.dims.k;
        let beta = self.beta();
        let alpha = self.alpha();
        let bt = beta.transpose();
        let n = r + k * d;
        let mut phi = DMatrix::zeros(n, n);

        let top = DMatrix::identity(r, r) + &bt * &alpha;
        phi.view_mut((0, 0), (r, r)).copy_from(&top);
        if k == 0 {
            return phi;
        }
        phi.view_mut((r, 0), (d, r)).copy_from(&alpha);
        for (i, g) in self.gammas().iter().enumerate() {
            let col = r + i * d;
            phi.view_mut((0, col), (r, d)).copy_from(&(&bt * g));
            phi.view_mut((r, col), (d, d)).copy_from(g);
        }
        for p in 1..k {
            let row = r + p * d;
            let col = r + (p - 1) * d;
            phi.view_mut((row, col), (d, d)).fill_with_identity();
        }
        phi
    }

    /// VAR(k+1) companion matrix of the levels `vec(X_t)`.
    pub fn levels_companion(&self) -> DMatrix<f64> {
        let d = self.dims.dim();
        let k = self.dims.k;
        let gammas = self.gammas();
        let eye = DMatrix::<f64>::identity(d, d);
        let mut coefs: Vec<DMatrix<f64>> = Vec::with_capacity(k + 1);
        let first = &eye + self.pi() + gammas.first().cloned().unwrap_or_else(|| DMatrix::zeros(d, d));
        coefs.push(first);
        for j in 1..k {
            coefs.push(&gammas[j] - &gammas[j - 1]);
        }
        if k >= 1 {
            coefs.push(-&gammas[k - 1]);
        }
        let n = d * (k + 1);
        let mut m = DMatrix::zeros(n, n);
        for (j, c) in coefs.iter().enumerate() {
            m.view_mut((0, j * d), (d, d)).copy_from(c);
        }
        for p in 1..=k {
            m.view_mut((p * d, (p - 1) * d), (d, d)).fill_with_identity();
        }
        m
    }

    /// Number of characteristic roots at `z = 1`, i.e. levels-companion
    /// eigenvalues with `|λ − 1| < tol`.
    pub fn unit_root_count(&self, tol: f64) -> Result<usize> {
        let eig = crate::linalg::eigenvalues(&self.levels_companion())?;
        Ok(eig
            .iter()
            .filter(|z| ((z.re - 1.0).powi(2) + z.im.powi(2)).sqrt() < tol)
            .count())
    }

    /// Checks the stored normalization to within `tol`.
    pub fn check_normalization(&self, tol: f64) -> Result<()> {
        let eye1 = DMatrix::<f64>::identity(self.dims.r1, self.dims.r1);
        let eye2 = DMatrix::<f64>::identity(self.dims.r2, self.dims.r2);
        let fail = |msg: String| Err(CmarError::Numerical(msg));
        if (self.beta1.transpose() * &self.beta1 - eye1).norm() > tol
            || (self.beta2.transpose() * &self.beta2 - eye2).norm() > tol
        {
            return fail("β columns are not orthonormal".into());
        }
        if (self.a1().norm() - 1.0).abs() > tol {
            return fail(format!("‖A₁‖_F = {}", self.a1().norm()));
        }
        for lag in &self.lags {
            let n = lag.b1.norm();
            if n != 0.0 && (n - 1.0).abs() > tol {
                return fail(format!("‖B_i1‖_F = {n}"));
            }
        }
        for beta in [&self.beta1, &self.beta2] {
            for col in beta.column_iter() {
                let idx = argmax_abs(col.iter()).unwrap_or(0);
                if col[idx] < 0.0 {
                    return fail("β column sign convention violated".into());
                }
            }
        }
        Ok(())
    }
}
