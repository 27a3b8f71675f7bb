//! Vector error-correction baseline on `vec(X_t)`:
//!
//! ```text
//! Δx_t = Π x_{t−1} + Σ_i Γ_i Δx_{t−i} + d + ε_t,   Π = α β'
//! ```
//!
//! Lagged differences and the constant are partialled out, then `Π` is the
//! rank-`r` reduced-rank regression of the residuals. With
//! [`Weighting::MaximumLikelihood`] this is the Johansen procedure (a
//! generalized symmetric eigenproblem solved after Cholesky whitening);
//! [`Weighting::LeastSquares`] uses identity weighting instead.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CmarError, Result};
use crate::json;
use crate::linalg::{gram_inverse, low_rank_factors, sym_eigen_desc, symmetrize, RANK_RTOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    MaximumLikelihood,
    LeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvarConfig {
    pub rank: usize,
    pub k: usize,
    pub include_constant: bool,
    pub weighting: Weighting,
}

impl CvarConfig {
    pub fn new(rank: usize, k: usize, include_constant: bool) -> Self {
        CvarConfig {
            rank,
            k,
            include_constant,
            weighting: Weighting::MaximumLikelihood,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvarModel {
    #[serde(with = "json::matrix")]
    pub alpha: DMatrix<f64>,
    /// Orthonormal, sign-fixed cointegrating vectors.
    #[serde(with = "json::matrix")]
    pub beta: DMatrix<f64>,
    #[serde(with = "json::matrix_vec")]
    pub gamma: Vec<DMatrix<f64>>,
    pub d_const: Vec<f64>,
    /// Residual covariance (divisor `T − k − 1`).
    #[serde(with = "json::matrix")]
    pub sigma: DMatrix<f64>,
    /// Eigenvalues of the reduced-rank problem, descending.
    pub eigenvalues: Vec<f64>,
    pub regularized: bool,
}

impl CvarModel {
    pub fn pi(&self) -> DMatrix<f64> {
        &self.alpha * self.beta.transpose()
    }
}

/// Fits the error-correction model to a vector series.
pub fn cvar_fit(series: &[DVector<f64>], cfg: &CvarConfig) -> Result<CvarModel> {
    let t_len = series.len();
    let k = cfg.k;
    if t_len < k + 2 {
        return Err(CmarError::Config(format!(
            "series of length {t_len} is too short for k = {k}"
        )));
    }
    let d = series[0].len();
    if series.iter().any(|x| x.len() != d) {
        return Err(CmarError::Shape("vector series with mixed lengths".into()));
    }
    if cfg.rank > d {
        return Err(CmarError::Config(format!("rank {} exceeds dimension {d}", cfg.rank)));
    }
    let n = t_len - k - 1;
    let p = k * d + usize::from(cfg.include_constant);

    let mut y0 = DMatrix::zeros(d, n);
    let mut y1 = DMatrix::zeros(d, n);
    let mut z = DMatrix::zeros(p, n);
    for (col, t) in (k + 1..t_len).enumerate() {
        y0.set_column(col, &(&series[t] - &series[t - 1]));
        y1.set_column(col, &series[t - 1]);
        for i in 1..=k {
            let lag = &series[t - i] - &series[t - i - 1];
            z.view_mut(((i - 1) * d, col), (d, 1)).copy_from(&lag);
        }
        if cfg.include_constant {
            z[(p - 1, col)] = 1.0;
        }
    }

    let mut regularized = false;
    let (r0, r1, mzz_inv) = if p > 0 {
        let (inv, ridged) = gram_inverse(&(&z * z.transpose()));
        regularized |= ridged;
        let r0 = &y0 - (&y0 * z.transpose()) * &inv * &z;
        let r1 = &y1 - (&y1 * z.transpose()) * &inv * &z;
        (r0, r1, inv)
    } else {
        (y0.clone(), y1.clone(), DMatrix::zeros(0, 0))
    };
    let nf = n as f64;
    let s00 = symmetrize(&(&r0 * r0.transpose() / nf));
    let s01 = &r0 * r1.transpose() / nf;
    let s11 = symmetrize(&(&r1 * r1.transpose() / nf));

    let (pi, eigenvalues) = if cfg.rank == 0 {
        (DMatrix::zeros(d, d), Vec::new())
    } else {
        match cfg.weighting {
            Weighting::MaximumLikelihood => {
                let (s00_inv, r_a) = gram_inverse(&s00);
                let (l, r_b) = cholesky_factor(&s11);
                regularized |= r_a || r_b;
                let l_inv = l
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| CmarError::Singular("Cholesky factor of S11".into()))?;
                let m = &l_inv * s01.transpose() * &s00_inv * &s01 * l_inv.transpose();
                let (vals, vecs) = sym_eigen_desc(&m);
                let v = vecs.columns(0, cfg.rank).into_owned();
                let beta_raw = l_inv.transpose() * v;
                let alpha = &s01 * &beta_raw;
                (alpha * beta_raw.transpose(), vals.iter().cloned().collect())
            }
            Weighting::LeastSquares => {
                let (s11_inv, ridged) = gram_inverse(&s11);
                regularized |= ridged;
                let full = &s01 * &s11_inv;
                let m = symmetrize(&(&full * s01.transpose()));
                let (vals, vecs) = sym_eigen_desc(&m);
                let u = vecs.columns(0, cfg.rank).into_owned();
                (&u * u.transpose() * full, vals.iter().cloned().collect())
            }
        }
    };

    let (alpha, beta) = low_rank_factors(&pi, cfg.rank);
    let resid_y = &y0 - &pi * &y1;
    let psi = if p > 0 {
        &resid_y * z.transpose() * &mzz_inv
    } else {
        DMatrix::zeros(d, 0)
    };
    let gamma = (0..k).map(|i| psi.columns(i * d, d).into_owned()).collect();
    let d_const = if cfg.include_constant {
        psi.column(p - 1).iter().cloned().collect()
    } else {
        vec![0.0; d]
    };
    let resid = resid_y - &psi * &z;
    let sigma = symmetrize(&(&resid * resid.transpose() / nf));

    Ok(CvarModel {
        alpha,
        beta,
        gamma,
        d_const,
        sigma,
        eigenvalues,
        regularized,
    })
}

/// Lower Cholesky factor, with the same relative ridge rule as `gram_inverse`.
fn cholesky_factor(m: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let n = m.nrows();
    let (vals, _) = sym_eigen_desc(m);
    let healthy = n == 0 || (vals[0] > 0.0 && vals[n - 1] > RANK_RTOL * vals[0]);
    if healthy {
        if let Some(c) = m.clone().cholesky() {
            return (c.l(), false);
        }
    }
    let mut lambda = (1e-10 * m.trace() / n as f64).max(1e-300);
    loop {
        let ridged = m + DMatrix::identity(n, n) * lambda;
        if let Some(c) = ridged.cholesky() {
            return (c.l(), true);
        }
        lambda *= 10.0;
    }
}

/// Best Frobenius approximation `Π ≈ outer ⊗ inner`.
#[derive(Debug, Clone)]
pub struct KroneckerFit {
    /// `d2×d2` left factor.
    pub outer: DMatrix<f64>,
    /// `d1×d1` right factor.
    pub inner: DMatrix<f64>,
    /// Singular values of the rearranged matrix, descending.
    pub singular_values: Vec<f64>,
}

impl KroneckerFit {
    /// `‖Π − outer⊗inner‖_F²`, equal to the sum of the trailing squared singular values.
    pub fn residual_sq(&self) -> f64 {
        self.singular_values.iter().skip(1).map(|s| s * s).sum()
    }
}

/// Nearest Kronecker product via a rank-one SVD of the rearrangement whose
/// row `(i, j)` is `vec` of the `(i, j)` block of `pi`.
pub fn nearest_kronecker(pi: &DMatrix<f64>, d1: usize, d2: usize) -> Result<KroneckerFit> {
    if pi.shape() != (d1 * d2, d1 * d2) {
        return Err(CmarError::Shape(format!(
            "expected {}x{} matrix, got {}x{}",
            d1 * d2,
            d1 * d2,
            pi.nrows(),
            pi.ncols()
        )));
    }
    let mut rearranged = DMatrix::zeros(d2 * d2, d1 * d1);
    for j in 0..d2 {
        for i in 0..d2 {
            let block = pi.view((i * d1, j * d1), (d1, d1));
            let row = i + j * d2;
            for (c, v) in block.iter().enumerate() {
                rearranged[(row, c)] = *v;
            }
        }
    }
    let svd = rearranged.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let lead = order[0];
    let s = svd.singular_values[lead].sqrt();
    let outer = DMatrix::from_column_slice(d2, d2, (u.column(lead) * s).as_slice());
    let inner = DMatrix::from_column_slice(d1, d1, (v_t.row(lead).transpose() * s).as_slice());
    Ok(KroneckerFit {
        outer,
        inner,
        singular_values: order.iter().map(|&i| svd.singular_values[i]).collect(),
    })
}
