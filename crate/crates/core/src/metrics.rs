//! Estimation-error metrics on the cointegration spaces and loadings.
//!
//! Spaces are compared through their orthogonal projections in the spectral
//! norm; loadings after aligning the estimated basis to the true one.

use nalgebra::DMatrix;

use crate::cvar::CvarModel;
use crate::error::Result;
use crate::linalg::{kron, procrustes, projection, spectral_norm};
use crate::model::CmarModel;

/// Value reported for an exactly zero error, `ln` of the smallest positive double.
pub const LOG_ZERO_SENTINEL: f64 = -745.0;

/// A log-scale error, with `exact` set when the error was exactly zero and
/// `value` holds [`LOG_ZERO_SENTINEL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogError {
    pub value: f64,
    pub exact: bool,
}

impl LogError {
    fn from_sum(sum: f64) -> Self {
        if sum == 0.0 {
            LogError {
                value: LOG_ZERO_SENTINEL,
                exact: true,
            }
        } else {
            LogError {
                value: sum.ln(),
                exact: false,
            }
        }
    }
}

/// `‖P_{β̂} − P_β‖_s`.
pub fn projection_distance(beta_hat: &DMatrix<f64>, beta: &DMatrix<f64>) -> Result<f64> {
    Ok(spectral_norm(&(projection(beta_hat)? - projection(beta)?)))
}

/// `log(‖P̂₁ − P₁‖_s² + ‖P̂₂ − P₂‖_s²)`.
pub fn projection_error(
    beta1_hat: &DMatrix<f64>,
    beta1: &DMatrix<f64>,
    beta2_hat: &DMatrix<f64>,
    beta2: &DMatrix<f64>,
) -> Result<LogError> {
    let e1 = projection_distance(beta1_hat, beta1)?;
    let e2 = projection_distance(beta2_hat, beta2)?;
    Ok(LogError::from_sum(e1 * e1 + e2 * e2))
}

/// `log ‖P_{β̂} − P_{β₂⊗β₁}‖_s²` for a vector-model estimate of the
/// `d1d2`-dimensional cointegration space.
pub fn cvar_projection_error(beta_hat: &DMatrix<f64>, beta1: &DMatrix<f64>, beta2: &DMatrix<f64>) -> Result<LogError> {
    let e = projection_distance(beta_hat, &kron(beta2, beta1))?;
    Ok(LogError::from_sum(e * e))
}

/// `‖α̂R − α‖_F²` with `R` the orthogonal Procrustes rotation taking `β̂` to `β`.
pub fn aligned_alpha_error(
    alpha_hat: &DMatrix<f64>,
    beta_hat: &DMatrix<f64>,
    alpha: &DMatrix<f64>,
    beta: &DMatrix<f64>,
) -> f64 {
    let r = procrustes(beta_hat, beta);
    (alpha_hat * r - alpha).norm_squared()
}

/// Loading error of a matrix model, `Σ_j ‖α̂_j R_j − s α_j‖_F²`, minimized over
/// the joint sign `s = ±1` left free by the normalization.
pub fn alpha_error(estimate: &CmarModel, truth: &CmarModel) -> f64 {
    let r1 = procrustes(&estimate.beta1, &truth.beta1);
    let r2 = procrustes(&estimate.beta2, &truth.beta2);
    let a1 = &estimate.alpha1 * r1;
    let a2 = &estimate.alpha2 * r2;
    [1.0, -1.0]
        .iter()
        .map(|s| (&a1 - &truth.alpha1 * *s).norm_squared() + (&a2 - &truth.alpha2 * *s).norm_squared())
        .fold(f64::INFINITY, f64::min)
}

/// Lag error `Σ_i ‖B̂_{i1} − s_i B_{i1}‖_F² + ‖B̂_{i2} − s_i B_{i2}‖_F²`, each
/// pair with its own best sign.
pub fn b_error(estimate: &CmarModel, truth: &CmarModel) -> f64 {
    estimate
        .lags
        .iter()
        .zip(&truth.lags)
        .map(|(e, t)| {
            [1.0, -1.0]
                .iter()
                .map(|s| (&e.b1 - &t.b1 * *s).norm_squared() + (&e.b2 - &t.b2 * *s).norm_squared())
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Loading error of the vector baseline against `α₂⊗α₁`, aligned on `β₂⊗β₁`.
pub fn cvar_alpha_error(estimate: &CvarModel, truth: &CmarModel) -> f64 {
    aligned_alpha_error(&estimate.alpha, &estimate.beta, &truth.alpha(), &truth.beta())
}

/// `Σ_i ‖Γ̂_i − B_{i2}⊗B_{i1}‖_F²`.
pub fn cvar_b_error(estimate: &CvarModel, truth: &CmarModel) -> f64 {
    estimate
        .gamma
        .iter()
        .zip(truth.gammas())
        .map(|(g, t)| (g - t).norm_squared())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{haar_semi_orthogonal, rng_from_seed};

    fn e(d: usize, i: usize) -> DMatrix<f64> {
        DMatrix::from_fn(d, 1, |r, _| if r == i { 1.0 } else { 0.0 })
    }

    #[test]
    fn identical_spaces_hit_the_sentinel() {
        let mut rng = rng_from_seed(1);
        let b1 = haar_semi_orthogonal(4, 2, &mut rng);
        let b2 = haar_semi_orthogonal(3, 1, &mut rng);
        let err = projection_error(&b1, &b1, &b2, &b2).unwrap();
        assert!(err.exact);
        assert_eq!(err.value, LOG_ZERO_SENTINEL);
        let cv = cvar_projection_error(&kron(&b2, &b1), &b1, &b2).unwrap();
        assert!(cv.value < -60.0);
    }

    #[test]
    fn orthogonal_lines_have_unit_distance() {
        let err = projection_error(&e(2, 1), &e(2, 0), &e(2, 0), &e(2, 0)).unwrap();
        assert!(err.value.abs() < 1e-15);
        let cv = cvar_projection_error(&e(4, 1), &e(2, 0), &e(2, 0)).unwrap();
        assert!(cv.value.abs() < 1e-15);
    }

    #[test]
    fn basis_choice_does_not_matter() {
        let mut rng = rng_from_seed(2);
        let b = haar_semi_orthogonal(5, 2, &mut rng);
        let mix = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -0.5, 3.0]);
        assert!(projection_distance(&(&b * mix), &b).unwrap() < 1e-12);
    }

    #[test]
    fn alpha_error_ignores_rotation_of_the_basis() {
        let mut rng = rng_from_seed(3);
        let beta = haar_semi_orthogonal(4, 2, &mut rng);
        let alpha = DMatrix::from_fn(4, 2, |i, j| (i + 2 * j) as f64);
        let rot = haar_semi_orthogonal(2, 2, &mut rng);
        let err = aligned_alpha_error(&(&alpha * &rot), &(&beta * &rot), &alpha, &beta);
        assert!(err < 1e-20);
    }
}
