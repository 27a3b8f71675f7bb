mod common;

use cmar::linalg::{kron, numerical_rank, spectral_radius, sym_eigen_desc, vec};
use cmar::model::{CmarModel, ErrorCovSpec};
use cmar::simulate::{
    draw_errors, gen_model, haar_semi_orthogonal, simulate_scaled, simulate_series, simulate_with_errors, ErrorSetting,
    SimConfig, STABILITY_BOUND,
};
use common::{dims, model, rng, uniform_matrix};
use nalgebra::{DMatrix, DVector};

fn random_walk() -> CmarModel {
    CmarModel {
        dims: dims(1, 1, 0, 1, 1),
        alpha1: DMatrix::zeros(1, 1),
        beta1: DMatrix::from_element(1, 1, 1.0),
        alpha2: DMatrix::zeros(1, 1),
        beta2: DMatrix::from_element(1, 1, 1.0),
        lags: vec![],
        constant: DMatrix::zeros(1, 1),
        error_cov: ErrorCovSpec::Identity,
    }
}

#[test]
fn random_walk_endpoint_variance() {
    let m = random_walk();
    let t = 200;
    let mut g = rng(21);
    let ends: Vec<f64> = (0..2000)
        .map(|_| simulate_series(&m, t, &mut g).unwrap().get(t - 1)[(0, 0)] / (t as f64).sqrt())
        .collect();
    let mean = ends.iter().sum::<f64>() / ends.len() as f64;
    let var = ends.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (ends.len() - 1) as f64;
    assert!((var - 1.0).abs() < 0.1, "variance {var}");
}

#[test]
fn constant_only_model_is_a_line() {
    let mut m = random_walk();
    m.constant = DMatrix::from_element(1, 1, 0.3);
    let s = simulate_scaled(&m, 50, 0.0, &mut rng(0)).unwrap();
    for t in 0..50 {
        assert!((s.get(t)[(0, 0)] - 0.3 * (t + 1) as f64).abs() < 1e-12);
    }
}

/// Replays `Δx_t = Π x_{t−1} + Σ Γ_i Δx_{t−i} + d + e_t` on the vectorized series.
fn replay(m: &CmarModel, errors: &[DMatrix<f64>]) -> Vec<DVector<f64>> {
    let d = m.dims.dim();
    let k = m.dims.k;
    let pi = kron(&m.a2(), &m.a1());
    let gammas: Vec<DMatrix<f64>> = m.lags.iter().map(|l| kron(&l.b2, &l.b1)).collect();
    let c = vec(&m.constant);
    let mut x = vec![DVector::zeros(d); k + 1];
    for e in errors {
        let t = x.len();
        let mut dx = &pi * &x[t - 1] + &c + vec(e);
        for (i, g) in gammas.iter().enumerate() {
            dx += g * (&x[t - 1 - i] - &x[t - 2 - i]);
        }
        let next = &x[t - 1] + dx;
        x.push(next);
    }
    x.split_off(k + 1)
}

#[test]
fn recursion_matches_independent_replay() {
    for (setting, seed) in [(ErrorSetting::I, 1), (ErrorSetting::II, 2), (ErrorSetting::Identity, 3)] {
        let m = model(dims(3, 2, 2, 2, 1), setting, true, seed);
        let errors = draw_errors(&m.error_cov, 3, 2, 60, &mut rng(seed + 50)).unwrap();
        let lib = simulate_with_errors(&m, &[], &errors).unwrap().vectorized();
        let oracle = replay(&m, &errors);
        for (a, b) in lib.iter().zip(&oracle) {
            assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()));
        }
    }
}

#[test]
fn haar_entries_have_zero_mean() {
    let mut g = rng(31);
    let n = 10_000;
    let mut sum = DMatrix::<f64>::zeros(4, 2);
    for _ in 0..n {
        let q = haar_semi_orthogonal(4, 2, &mut g);
        assert!((q.transpose() * &q - DMatrix::identity(2, 2)).norm() < 1e-12);
        sum += q;
    }
    let bound = 4.0 / (n as f64).sqrt();
    assert!((sum / n as f64).iter().all(|m| m.abs() < bound));
}

#[test]
fn setting_one_eigenvalues_are_spaced_on_one_to_ten() {
    let m = model(dims(2, 3, 1, 1, 1), ErrorSetting::I, false, 4);
    let ErrorCovSpec::Dense { sigma } = &m.error_cov else {
        panic!("setting I gives a dense covariance")
    };
    let (vals, _) = sym_eigen_desc(sigma);
    for (i, v) in vals.iter().rev().enumerate() {
        assert!((v - (1.0 + 9.0 * i as f64 / 5.0)).abs() < 1e-10);
    }
}

#[test]
fn setting_two_factors_are_spaced_on_one_to_five() {
    let m = model(dims(3, 4, 1, 1, 1), ErrorSetting::II, false, 5);
    let ErrorCovSpec::Separable { sigma1, sigma2 } = &m.error_cov else {
        panic!("setting II gives separable factors")
    };
    for s in [sigma1, sigma2] {
        let n = s.nrows();
        let (vals, _) = sym_eigen_desc(s);
        for (i, v) in vals.iter().rev().enumerate() {
            assert!((v - (1.0 + 4.0 * i as f64 / (n - 1) as f64)).abs() < 1e-10);
        }
    }
}

#[test]
fn accepted_models_are_stable_and_have_exact_rank() {
    for seed in 0..40 {
        let dm = dims(3, 4, 1 + (seed as usize % 2), 2, 1);
        let mut cfg = SimConfig::new(dm, 10, ErrorSetting::II, seed);
        cfg.include_constant = true;
        let m = gen_model(&cfg, &mut rng(seed)).unwrap();
        assert!(spectral_radius(&m.companion_matrix()).unwrap() < STABILITY_BOUND);
        assert_eq!(numerical_rank(&m.a1()), 2);
        assert_eq!(numerical_rank(&m.a2()), 1);
        assert!((m.constant.norm() - 0.8).abs() < 1e-12);
        assert!((m.a1().norm() - 1.0).abs() < 1e-12);
        for l in &m.lags {
            assert!((l.b1.norm() - 1.0).abs() < 1e-12);
        }
    }
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[test]
fn cointegrated_combination_stays_bounded_while_levels_grow() {
    let (mut early, mut late) = (0.0, 0.0);
    for seed in 0..50 {
        let m = model(dims(3, 3, 1, 1, 1), ErrorSetting::II, false, seed);
        let s = simulate_series(&m, 4000, &mut rng(seed + 1000)).unwrap();
        let z: Vec<f64> = s
            .values()
            .iter()
            .map(|x| (m.beta1.transpose() * x * &m.beta2)[(0, 0)])
            .collect();
        let (v1000, v4000) = (sample_variance(&z[..1000]), sample_variance(&z));
        assert!(v4000 < 3.0 * v1000, "seed {seed}: {v1000} vs {v4000}");
        early += s.get(999).norm_squared();
        late += s.get(3999).norm_squared();
    }
    // E tr(X_t'X_t) grows linearly in t for an I(1) process
    assert!(late > 2.0 * early, "{early} vs {late}");
}

#[test]
fn constant_produces_linear_growth() {
    let mut g = rng(77);
    let mut count = 0;
    for seed in 0..20 {
        let m = model(dims(3, 3, 1, 1, 1), ErrorSetting::II, true, seed);
        let s = simulate_series(&m, 8000, &mut g).unwrap();
        let ratio = s.get(7999).norm() / s.get(3999).norm();
        if (ratio - 2.0).abs() < 0.4 {
            count += 1;
        }
    }
    assert!(count >= 18, "{count} of 20 runs double their norm between T/2 and T");
}

#[test]
fn uniform_helper_is_bounded() {
    assert!(uniform_matrix(3, 3, &mut rng(1)).iter().all(|v| v.abs() <= 1.0));
}
