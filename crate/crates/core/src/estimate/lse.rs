use nalgebra::DMatrix;

use super::panel::{half_step, Coefs, EigenWeight, Panel};
use super::{initial_values, relative_change, Coefficients, EstimationResult, FitConfig};
use crate::error::{CmarError, Result};
use crate::model::{Dims, ErrorCovSpec};
use crate::series::MatrixSeries;

/// Residual sum of squares `Σ_t ‖ΔX_t − A₁X_{t−1}A₂' − Σ B_{i1}ΔX_{t−i}B_{i2}' − D‖_F²`.
pub fn lse_objective(series: &MatrixSeries, k: usize, coefs: &Coefficients) -> Result<f64> {
    let panel = Panel::new(series, k)?;
    Ok(panel_rss(&panel, coefs))
}

pub(crate) fn panel_rss(panel: &Panel, c: &Coefficients) -> f64 {
    let left = Coefs {
        a: c.a1.clone(),
        b: c.b1.clone(),
        d: c.d.clone(),
    };
    panel.residuals(&left, &c.a2, &c.b2).map(|r| r.norm_squared()).sum()
}

/// Least-squares update of `(A₁, B_{·1}, D)` with the right factors held fixed.
pub fn lse_update_left(series: &MatrixSeries, current: &Coefficients, cfg: &FitConfig) -> Result<Coefficients> {
    let panel = Panel::new(series, cfg.k)?;
    let step = half_step(
        &panel,
        &current.a2,
        &current.b2,
        None,
        cfg.ranks.0,
        cfg.include_constant,
        EigenWeight::Identity,
    )?;
    Ok(Coefficients {
        a1: step.coefs.a,
        b1: step.coefs.b,
        d: step.coefs.d,
        ..current.clone()
    })
}

/// Least-squares update of `(A₂, B_{·2}, D)` with the left factors held fixed.
pub fn lse_update_right(series: &MatrixSeries, current: &Coefficients, cfg: &FitConfig) -> Result<Coefficients> {
    let panel = Panel::new(&series.transposed(), cfg.k)?;
    let step = half_step(
        &panel,
        &current.a1,
        &current.b1,
        None,
        cfg.ranks.1,
        cfg.include_constant,
        EigenWeight::Identity,
    )?;
    Ok(Coefficients {
        a2: step.coefs.a,
        b2: step.coefs.b,
        d: step.coefs.d.transpose(),
        ..current.clone()
    })
}

/// Alternating least squares under `rank(A₁) = r1`, `rank(A₂) = r2`.
pub fn lse_fit(series: &MatrixSeries, cfg: &FitConfig) -> Result<EstimationResult> {
    let dims = cfg.validate(series)?;
    let panel = Panel::new(series, cfg.k)?;
    let panel_t = Panel::new(&series.transposed(), cfg.k)?;
    let mut coefs = initial_values(series, dims, cfg)?.coefs;
    let mut trace = vec![checked_objective(panel_rss(&panel, &coefs))?];
    let mut iterates = Vec::new();
    let mut regularized = false;
    let mut converged = false;
    let mut best = (trace[0], coefs.clone());

    for _ in 0..cfg.max_iter {
        let left = half_step(
            &panel,
            &coefs.a2,
            &coefs.b2,
            None,
            dims.r1,
            cfg.include_constant,
            EigenWeight::Identity,
        )?;
        coefs.a1 = left.coefs.a;
        coefs.b1 = left.coefs.b;
        coefs.d = left.coefs.d;
        let right = half_step(
            &panel_t,
            &coefs.a1,
            &coefs.b1,
            None,
            dims.r2,
            cfg.include_constant,
            EigenWeight::Identity,
        )?;
        coefs.a2 = right.coefs.a;
        coefs.b2 = right.coefs.b;
        coefs.d = right.coefs.d.transpose();
        coefs.rebalance();
        regularized |= left.regularized || right.regularized;

        let obj = checked_objective(panel_rss(&panel, &coefs))?;
        let change = relative_change(*trace.last().unwrap(), obj);
        trace.push(obj);
        if cfg.record_iterates {
            iterates.push(coefs.clone());
        }
        if obj <= best.0 {
            best = (obj, coefs.clone());
        }
        if change < cfg.tol {
            converged = true;
            break;
        }
    }

    let final_coefs = if converged { coefs } else { best.1 };
    let model = final_coefs.to_model(dims, residual_covariance(&panel, &final_coefs, dims))?;
    Ok(EstimationResult {
        model,
        iterations: trace.len() - 1,
        objective_trace: trace,
        converged,
        regularized,
        covariance_floored: false,
        sigma1: None,
        sigma2: None,
        iterates,
    })
}

/// Sample covariance of `vec` residuals, divisor `T − k − 1`.
fn residual_covariance(panel: &Panel, c: &Coefficients, dims: Dims) -> ErrorCovSpec {
    let left = Coefs {
        a: c.a1.clone(),
        b: c.b1.clone(),
        d: c.d.clone(),
    };
    let d = dims.dim();
    let mut acc = DMatrix::zeros(d, d);
    for r in panel.residuals(&left, &c.a2, &c.b2) {
        let v = DMatrix::from_column_slice(d, 1, r.as_slice());
        acc += &v * v.transpose();
    }
    let sigma = acc / panel.n() as f64;
    match crate::linalg::sym_eigen_desc(&sigma).0.iter().next_back() {
        Some(&min) if min > 0.0 => ErrorCovSpec::Dense { sigma },
        _ => ErrorCovSpec::Identity,
    }
}

pub(crate) fn checked_objective(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CmarError::Numerical("objective is not finite".into()))
    }
}
