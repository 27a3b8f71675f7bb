use nalgebra::DMatrix;

use super::lse::checked_objective;
use super::panel::{half_step, Coefs, EigenWeight, HalfStep, Panel};
use super::{initial_values, normalize_sigmas, relative_change, Coefficients, EstimationResult, FitConfig};
use crate::error::{CmarError, Result};
use crate::linalg::{eigen_floor, spd_inverse, sym_eigen_desc, symmetrize};
use crate::model::{CmarModel, Dims, ErrorCovSpec};
use crate::series::MatrixSeries;

/// Current iterate of the likelihood ascent.
#[derive(Debug, Clone)]
pub struct MleState {
    pub model: CmarModel,
    pub sigma1: DMatrix<f64>,
    pub sigma2: DMatrix<f64>,
    pub loglik: f64,
}

/// Log-likelihood up to a constant (twice the Gaussian one), with `n = T − k − 1`:
///
/// ```text
/// −d2·n·log|Σ₁| − d1·n·log|Σ₂| − Σ_t tr(Σ₁⁻¹ R_t Σ₂⁻¹ R_t')
/// ```
pub fn loglik(series: &MatrixSeries, model: &CmarModel, sigma1: &DMatrix<f64>, sigma2: &DMatrix<f64>) -> Result<f64> {
    let panel = Panel::new(series, model.dims.k)?;
    if series.d1() != model.dims.d1 || series.d2() != model.dims.d2 {
        return Err(CmarError::Shape("series and model dimensions differ".into()));
    }
    let w1 = CovWeight::new(sigma1, "sigma1")?;
    let w2 = CovWeight::new(sigma2, "sigma2")?;
    Ok(panel_loglik(&panel, &Coefficients::from_model(model), &w1, &w2))
}

/// Inverse and log-determinant of a covariance factor.
struct CovWeight {
    inv: DMatrix<f64>,
    logdet: f64,
}

impl CovWeight {
    fn new(sigma: &DMatrix<f64>, name: &str) -> Result<Self> {
        if !sigma.is_square() || (sigma - sigma.transpose()).amax() > 1e-12 * sigma.amax().max(1.0) {
            return Err(CmarError::Covariance(format!("{name} is not symmetric")));
        }
        let (vals, _) = sym_eigen_desc(sigma);
        if vals.iter().any(|&v| !(v > 0.0)) {
            return Err(CmarError::Covariance(format!("{name} is not positive definite")));
        }
        Ok(CovWeight {
            inv: spd_inverse(sigma)?,
            logdet: vals.iter().map(|v| v.ln()).sum(),
        })
    }
}

fn panel_loglik(panel: &Panel, c: &Coefficients, w1: &CovWeight, w2: &CovWeight) -> f64 {
    let n = panel.n() as f64;
    let (d1, d2) = (panel.rows() as f64, panel.cols() as f64);
    let left = Coefs {
        a: c.a1.clone(),
        b: c.b1.clone(),
        d: c.d.clone(),
    };
    let quad: f64 = panel
        .residuals(&left, &c.a2, &c.b2)
        .map(|r| (&w1.inv * &r * &w2.inv).dot(&r))
        .sum();
    -d2 * n * w1.logdet - d1 * n * w2.logdet - quad
}

/// Covariance update `Σ = moment / divisor`, floored at `1e-10` of its largest diagonal.
fn covariance_from_moment(moment: &DMatrix<f64>, divisor: f64) -> (DMatrix<f64>, bool) {
    let s = symmetrize(&(moment / divisor));
    let scale = s.diagonal().amax().max(f64::MIN_POSITIVE);
    eigen_floor(&s, 1e-10 * scale)
}

fn left_step(
    panel: &Panel,
    c: &Coefficients,
    sigma1: &DMatrix<f64>,
    sigma2: &DMatrix<f64>,
    cfg: &FitConfig,
) -> Result<HalfStep> {
    let eigen = if cfg.freeze_covariance {
        EigenWeight::Fixed(sigma1)
    } else {
        EigenWeight::FullRank
    };
    let w = spd_inverse(sigma2)?;
    half_step(panel, &c.a2, &c.b2, Some(&w), cfg.ranks.0, cfg.include_constant, eigen)
}

fn right_step(
    panel_t: &Panel,
    c: &Coefficients,
    sigma1: &DMatrix<f64>,
    sigma2: &DMatrix<f64>,
    cfg: &FitConfig,
) -> Result<HalfStep> {
    let eigen = if cfg.freeze_covariance {
        EigenWeight::Fixed(sigma2)
    } else {
        EigenWeight::FullRank
    };
    let w = spd_inverse(sigma1)?;
    half_step(
        panel_t,
        &c.a1,
        &c.b1,
        Some(&w),
        cfg.ranks.1,
        cfg.include_constant,
        eigen,
    )
}

/// Likelihood update of `(A₁, Ψ₁, Σ₁)` given the right factors and `Σ₂`.
/// With `freeze_covariance` the weights are `Σ₁ = I` and `Σ₁` is returned unchanged.
pub fn mle_update_left(
    series: &MatrixSeries,
    current: &Coefficients,
    sigma2: &DMatrix<f64>,
    cfg: &FitConfig,
) -> Result<(Coefficients, DMatrix<f64>)> {
    let panel = Panel::new(series, cfg.k)?;
    let d1 = series.d1();
    let eye = DMatrix::identity(d1, d1);
    let step = left_step(&panel, current, &eye, sigma2, cfg)?;
    let sigma1 = if cfg.freeze_covariance {
        eye
    } else {
        covariance_from_moment(&step.resid_moment, (panel.n() * series.d2()) as f64).0
    };
    let coefs = Coefficients {
        a1: step.coefs.a,
        b1: step.coefs.b,
        d: step.coefs.d,
        ..current.clone()
    };
    Ok((coefs, sigma1))
}

/// Mirror of [`mle_update_left`]: updates `(A₂, Ψ₂, Σ₂)` given the left factors and `Σ₁`.
/// The returned `Σ₂` is not trace-normalized.
pub fn mle_update_right(
    series: &MatrixSeries,
    current: &Coefficients,
    sigma1: &DMatrix<f64>,
    cfg: &FitConfig,
) -> Result<(Coefficients, DMatrix<f64>)> {
    let panel_t = Panel::new(&series.transposed(), cfg.k)?;
    let d2 = series.d2();
    let eye = DMatrix::identity(d2, d2);
    let step = right_step(&panel_t, current, sigma1, &eye, cfg)?;
    let sigma2 = if cfg.freeze_covariance {
        eye
    } else {
        covariance_from_moment(&step.resid_moment, (panel_t.n() * series.d1()) as f64).0
    };
    let coefs = Coefficients {
        a2: step.coefs.a,
        b2: step.coefs.b,
        d: step.coefs.d.transpose(),
        ..current.clone()
    };
    Ok((coefs, sigma2))
}

/// Alternating maximum likelihood under `Cov(vec E_t) = Σ₂ ⊗ Σ₁`.
pub fn mle_fit(series: &MatrixSeries, cfg: &FitConfig) -> Result<EstimationResult> {
    let dims = cfg.validate(series)?;
    let Dims { d1, d2, .. } = dims;
    let panel = Panel::new(series, cfg.k)?;
    let panel_t = Panel::new(&series.transposed(), cfg.k)?;
    let start = initial_values(series, dims, cfg)?;
    let mut coefs = start.coefs;
    let (mut sigma1, mut sigma2) = match (cfg.freeze_covariance, start.sigmas) {
        (false, Some((s1, s2))) => (s1, s2),
        _ => (DMatrix::identity(d1, d1), DMatrix::identity(d2, d2)),
    };

    let objective = |c: &Coefficients, s1: &DMatrix<f64>, s2: &DMatrix<f64>| -> Result<f64> {
        let w1 = CovWeight::new(s1, "sigma1")?;
        let w2 = CovWeight::new(s2, "sigma2")?;
        checked_objective(panel_loglik(&panel, c, &w1, &w2))
    };

    let mut trace = vec![objective(&coefs, &sigma1, &sigma2)?];
    let mut iterates = Vec::new();
    let mut regularized = false;
    let mut floored = false;
    let mut converged = false;
    let mut best = (trace[0], coefs.clone(), sigma1.clone(), sigma2.clone());
    let n = panel.n() as f64;

    for _ in 0..cfg.max_iter {
        let left = left_step(&panel, &coefs, &sigma1, &sigma2, cfg)?;
        coefs.a1 = left.coefs.a;
        coefs.b1 = left.coefs.b;
        coefs.d = left.coefs.d;
        if !cfg.freeze_covariance {
            let (s1, lifted) = covariance_from_moment(&left.resid_moment, n * d2 as f64);
            sigma1 = s1;
            floored |= lifted;
        }

        let right = right_step(&panel_t, &coefs, &sigma1, &sigma2, cfg)?;
        coefs.a2 = right.coefs.a;
        coefs.b2 = right.coefs.b;
        coefs.d = right.coefs.d.transpose();
        if !cfg.freeze_covariance {
            let (s2, lifted) = covariance_from_moment(&right.resid_moment, n * d1 as f64);
            (sigma1, sigma2) = normalize_sigmas(sigma1, s2);
            floored |= lifted;
        }
        coefs.rebalance();
        regularized |= left.regularized || right.regularized;
        floored |= left.floored || right.floored;

        let ll = objective(&coefs, &sigma1, &sigma2)?;
        let change = relative_change(*trace.last().unwrap(), ll);
        trace.push(ll);
        if cfg.record_iterates {
            iterates.push(coefs.clone());
        }
        if ll >= best.0 {
            best = (ll, coefs.clone(), sigma1.clone(), sigma2.clone());
        }
        if change < cfg.tol {
            converged = true;
            break;
        }
    }

    if !converged {
        (_, coefs, sigma1, sigma2) = best;
    }
    let cov = ErrorCovSpec::Separable {
        sigma1: sigma1.clone(),
        sigma2: sigma2.clone(),
    };
    let model = coefs.to_model(dims, cov)?;
    Ok(EstimationResult {
        model,
        iterations: trace.len() - 1,
        objective_trace: trace,
        converged,
        regularized,
        covariance_floored: floored,
        sigma1: Some(sigma1),
        sigma2: Some(sigma2),
        iterates,
    })
}

impl MleState {
    /// Packages a finished fit, re-evaluating the log-likelihood on `series`.
    pub fn from_result(series: &MatrixSeries, res: &EstimationResult) -> Result<Self> {
        let (s1, s2) = match (&res.sigma1, &res.sigma2) {
            (Some(a), Some(b)) => (a.clone(), b.clone()),
            _ => return Err(CmarError::Config("result carries no covariance factors".into())),
        };
        let ll = loglik(series, &res.model, &s1, &s2)?;
        Ok(MleState {
            model: res.model.clone(),
            sigma1: s1,
            sigma2: s2,
            loglik: ll,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvar::{cvar_fit, CvarConfig};
    use crate::estimate::{lse_fit, lse_update_left, Init};
    use crate::simulate::{gen_model, rng_from_seed, simulate_series, ErrorSetting, SimConfig};

    fn simulated(dims: Dims, t: usize, seed: u64, constant: bool) -> (CmarModel, MatrixSeries) {
        let mut cfg = SimConfig::new(dims, t, ErrorSetting::II, seed);
        cfg.include_constant = constant;
        let mut rng = rng_from_seed(seed);
        let model = gen_model(&cfg, &mut rng).unwrap();
        let series = simulate_series(&model, t, &mut rng).unwrap();
        (model, series)
    }

    #[test]
    fn zero_residuals_leave_determinant_terms() {
        let dims = Dims::new(2, 1, 0, 1, 1).unwrap();
        let (model, _) = simulated(dims, 50, 1, false);
        let path = crate::simulate::simulate_with_errors(
            &model,
            &[DMatrix::from_column_slice(2, 1, &[1.0, -2.0])],
            &vec![DMatrix::zeros(2, 1); 30],
        )
        .unwrap();
        let s1 = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s2 = DMatrix::from_element(1, 1, 3.0);
        let ll = loglik(&path, &model, &s1, &s2).unwrap();
        let n = 29.0;
        let expected = -n * s1.determinant().ln() - 2.0 * n * 3f64.ln();
        assert!((ll - expected).abs() < 1e-9 * expected.abs());
    }

    #[test]
    fn scalar_loglik_matches_gaussian_formula() {
        let dims = Dims::new(1, 1, 0, 1, 1).unwrap();
        let (model, series) = simulated(dims, 80, 2, false);
        let (s1, s2) = (0.7, 1.9);
        let ll = loglik(
            &series,
            &model,
            &DMatrix::from_element(1, 1, s1),
            &DMatrix::from_element(1, 1, s2),
        )
        .unwrap();
        let a = model.pi()[(0, 0)];
        let xs: Vec<f64> = series.values().iter().map(|m| m[(0, 0)]).collect();
        let v = s1 * s2;
        let n = (xs.len() - 1) as f64;
        let rss: f64 = (1..xs.len()).map(|t| (xs[t] - xs[t - 1] - a * xs[t - 1]).powi(2)).sum();
        assert!((ll - (-n * v.ln() - rss / v)).abs() < 1e-9);
    }

    #[test]
    fn kronecker_scale_is_unidentified() {
        let dims = Dims::new(2, 2, 1, 1, 1).unwrap();
        let (model, series) = simulated(dims, 60, 3, true);
        let s1 = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s2 = DMatrix::from_row_slice(2, 2, &[1.0, -0.2, -0.2, 1.5]);
        let a = loglik(&series, &model, &s1, &s2).unwrap();
        let b = loglik(&series, &model, &(&s1 / 3.5), &(&s2 * 3.5)).unwrap();
        assert!((a - b).abs() < 1e-9 * a.abs());
    }

    #[test]
    fn non_spd_covariance_rejected() {
        let dims = Dims::new(2, 2, 0, 1, 1).unwrap();
        let (model, series) = simulated(dims, 40, 4, false);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            loglik(&series, &model, &bad, &DMatrix::identity(2, 2)),
            Err(CmarError::Covariance(_))
        ));
    }

    #[test]
    fn frozen_identity_update_equals_lse_update() {
        let dims = Dims::new(3, 3, 1, 1, 1).unwrap();
        let (model, series) = simulated(dims, 200, 5, true);
        let mut cfg = FitConfig::new((1, 1), 1, true);
        cfg.freeze_covariance = true;
        cfg.init = Init::Provided(Box::new(model.clone()));
        let start = Coefficients::from_model(&model);
        let (m, _) = mle_update_left(&series, &start, &DMatrix::identity(3, 3), &cfg).unwrap();
        let l = lse_update_left(&series, &start, &cfg).unwrap();
        assert!((m.a1 - l.a1).norm() < 1e-10);
        assert!((m.d - l.d).norm() < 1e-10);
    }

    #[test]
    fn column_vector_left_update_is_johansen() {
        for seed in 0..5 {
            let dims = Dims::new(4, 1, 0, 2, 1).unwrap();
            let (_, series) = simulated(dims, 400, 60 + seed, false);
            let cfg = FitConfig::new((2, 1), 0, false);
            let start = Coefficients {
                a1: DMatrix::zeros(4, 4),
                a2: DMatrix::from_element(1, 1, 1.0),
                b1: vec![],
                b2: vec![],
                d: DMatrix::zeros(4, 1),
            };
            let (upd, _) = mle_update_left(&series, &start, &DMatrix::identity(1, 1), &cfg).unwrap();
            let jo = cvar_fit(&series.vectorized(), &CvarConfig::new(2, 0, false)).unwrap();
            assert!((upd.a1 - jo.pi()).norm() < 1e-8);
        }
    }

    #[test]
    fn likelihood_trace_is_non_decreasing() {
        for seed in 0..5 {
            let dims = Dims::new(3, 2, 1, 1, 1).unwrap();
            let (_, series) = simulated(dims, 300, 80 + seed, true);
            let res = mle_fit(&series, &FitConfig::new((1, 1), 1, true)).unwrap();
            for w in res.objective_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-8 * w[0].abs().max(1.0), "{w:?}");
            }
            let s2 = res.sigma2.as_ref().unwrap();
            assert!((s2.trace() - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn frozen_fit_tracks_lse_fit() {
        let dims = Dims::new(3, 2, 1, 1, 1).unwrap();
        let (_, series) = simulated(dims, 300, 90, true);
        let mut cfg = FitConfig::new((1, 1), 1, true);
        cfg.freeze_covariance = true;
        cfg.record_iterates = true;
        let a = mle_fit(&series, &cfg).unwrap();
        let b = lse_fit(&series, &cfg).unwrap();
        assert_eq!(a.iterates.len(), b.iterates.len());
        for (x, y) in a.iterates.iter().zip(&b.iterates) {
            assert!((&x.a1 - &y.a1).amax() < 1e-10);
            assert!((&x.a2 - &y.a2).amax() < 1e-10);
        }
    }
}
