//! One half of an alternating sweep.
//!
//! With the right-hand factors `(A₂, B_{·2})` and a column weight `W` fixed,
//! the model is a pooled reduced-rank regression for each column `j`:
//!
//! ```text
//! Y_t = ΔX_t,  R_t = X_{t−1} A₂',  Z_t = [ΔX_{t−1}B₁₂'; …; ΔX_{t−k}B_{k2}'; I_{d2}]
//! Y_t = A₁ R_t + Ψ₁ Z_t + E_t,   Ψ₁ = [B₁₁ … B_{k1} D]
//! ```
//!
//! All moment matrices `S_ab = Σ_t a_t W b_t'` come from the single stacked
//! Gram matrix of `G_t = [Y_t; R_t; Z_t]`. The right half-step is the same
//! computation on the transposed series.

use nalgebra::DMatrix;

use crate::error::{CmarError, Result};
use crate::linalg::{eigen_floor, gram_inverse, spd_inv_sqrt, spd_sqrt, sym_eigen_desc, symmetrize};
use crate::series::MatrixSeries;

/// Levels and first differences of a series, in one orientation.
#[derive(Debug, Clone)]
pub(crate) struct Panel {
    levels: Vec<DMatrix<f64>>,
    diffs: Vec<DMatrix<f64>>,
    k: usize,
    rows: usize,
    cols: usize,
}

impl Panel {
    pub(crate) fn new(series: &MatrixSeries, k: usize) -> Result<Self> {
        let t = series.len();
        if t < k + 2 {
            return Err(CmarError::Config(format!(
                "series of length {t} is too short for k = {k} (need at least {})",
                k + 2
            )));
        }
        let levels = series.values().to_vec();
        let mut diffs = Vec::with_capacity(t);
        diffs.push(DMatrix::zeros(series.d1(), series.d2()));
        for w in levels.windows(2) {
            diffs.push(&w[1] - &w[0]);
        }
        Ok(Panel {
            levels,
            diffs,
            k,
            rows: series.d1(),
            cols: series.d2(),
        })
    }

    /// Effective sample size `T − k − 1`.
    pub(crate) fn n(&self) -> usize {
        self.levels.len() - self.k - 1
    }

    pub(crate) fn rows(&self) -> usize {
        self.rows
    }

    pub(crate) fn cols(&self) -> usize {
        self.cols
    }

    fn times(&self) -> std::ops::Range<usize> {
        self.k + 1..self.levels.len()
    }

    /// Residuals `ΔX_t − A X_{t−1} A₂' − Σ B_{i} ΔX_{t−i} B_{i2}' − D` over the sample.
    pub(crate) fn residuals<'a>(
        &'a self,
        left: &'a Coefs,
        right_a: &'a DMatrix<f64>,
        right_b: &'a [DMatrix<f64>],
    ) -> impl Iterator<Item = DMatrix<f64>> + 'a {
        let a2t = right_a.transpose();
        let b2t: Vec<DMatrix<f64>> = right_b.iter().map(|b| b.transpose()).collect();
        self.times().map(move |t| {
            let mut r = &self.diffs[t] - &left.a * &self.levels[t - 1] * &a2t - &left.d;
            for (i, (b1, b2t)) in left.b.iter().zip(&b2t).enumerate() {
                r -= b1 * &self.diffs[t - 1 - i] * b2t;
            }
            r
        })
    }
}

/// Left-side coefficients of a half-step: `A`, lag matrices `B_{i}`, constant `D`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Coefs {
    pub a: DMatrix<f64>,
    pub b: Vec<DMatrix<f64>>,
    pub d: DMatrix<f64>,
}

/// Weighting used in the reduced-rank eigen step.
#[derive(Debug, Clone, Copy)]
pub(crate) enum EigenWeight<'a> {
    /// Plain least squares.
    Identity,
    /// Known row covariance `Σ`.
    Fixed(&'a DMatrix<f64>),
    /// Residual covariance of the unrestricted fit (profile likelihood).
    FullRank,
}

/// Outcome of a half-step.
#[derive(Debug, Clone)]
pub(crate) struct HalfStep {
    pub coefs: Coefs,
    /// `Σ_t R̂_t W R̂_t'` at the updated coefficients.
    pub resid_moment: DMatrix<f64>,
    pub regularized: bool,
    pub floored: bool,
}

/// Stacked Gram matrix `Σ_t G_t W G_t'` and its block layout.
pub(crate) struct Moments {
    s: DMatrix<f64>,
    d1: usize,
    p: usize,
}

impl Moments {
    fn block(&self, r: (usize, usize), c: (usize, usize)) -> DMatrix<f64> {
        self.s.view((r.0, c.0), (r.1, c.1)).into_owned()
    }

    fn y(&self) -> (usize, usize) {
        (0, self.d1)
    }

    fn x(&self) -> (usize, usize) {
        (self.d1, self.d1)
    }

    fn z(&self) -> (usize, usize) {
        (2 * self.d1, self.p)
    }
}

pub(crate) fn moments(
    panel: &Panel,
    right_a: &DMatrix<f64>,
    right_b: &[DMatrix<f64>],
    weight: Option<&DMatrix<f64>>,
    constant: bool,
) -> Moments {
    let d1 = panel.rows;
    let d2 = panel.cols;
    let k = panel.k;
    let p = k * d1 + if constant { d2 } else { 0 };
    let q = 2 * d1 + p;
    let a2t = right_a.transpose();
    let b2t: Vec<DMatrix<f64>> = right_b.iter().map(|b| b.transpose()).collect();
    let mut s = DMatrix::zeros(q, q);
    let mut g = DMatrix::zeros(q, d2);
    for t in panel.times() {
        g.view_mut((0, 0), (d1, d2)).copy_from(&panel.diffs[t]);
        g.view_mut((d1, 0), (d1, d2)).copy_from(&(&panel.levels[t - 1] * &a2t));
        for (i, b) in b2t.iter().enumerate() {
            g.view_mut((2 * d1 + i * d1, 0), (d1, d2))
                .copy_from(&(&panel.diffs[t - 1 - i] * b));
        }
        if constant {
            g.view_mut((2 * d1 + k * d1, 0), (d2, d2)).fill_with_identity();
        }
        match weight {
            Some(w) => s += (&g * w) * g.transpose(),
            None => s += &g * g.transpose(),
        }
    }
    Moments {
        s: symmetrize(&s),
        d1,
        p,
    }
}

/// Rank-constrained update of the left coefficients given the right ones.
pub(crate) fn half_step(
    panel: &Panel,
    right_a: &DMatrix<f64>,
    right_b: &[DMatrix<f64>],
    weight: Option<&DMatrix<f64>>,
    rank: usize,
    constant: bool,
    eigen: EigenWeight<'_>,
) -> Result<HalfStep> {
    let d1 = panel.rows;
    let d2 = panel.cols;
    let k = panel.k;
    let m = moments(panel, right_a, right_b, weight, constant);
    let (y, x, z) = (m.y(), m.x(), m.z());

    let s_yx = m.block(y, x);
    let s_xx = m.block(x, x);
    let s_yy = m.block(y, y);
    let mut regularized = false;

    let (s_yx_z, s_xx_z, s_yy_z, s_yz, s_xz, szz_inv) = if m.p > 0 {
        let s_yz = m.block(y, z);
        let s_xz = m.block(x, z);
        let (szz_inv, ridged) = gram_inverse(&m.block(z, z));
        regularized |= ridged;
        let yz_inv = &s_yz * &szz_inv;
        let xz_inv = &s_xz * &szz_inv;
        let s_yx_z = &s_yx - &yz_inv * s_xz.transpose();
        let s_xx_z = symmetrize(&(&s_xx - &xz_inv * s_xz.transpose()));
        let s_yy_z = symmetrize(&(&s_yy - &yz_inv * s_yz.transpose()));
        (s_yx_z, s_xx_z, s_yy_z, s_yz, s_xz, szz_inv)
    } else {
        (
            s_yx,
            s_xx,
            s_yy,
            DMatrix::zeros(d1, 0),
            DMatrix::zeros(d1, 0),
            DMatrix::zeros(0, 0),
        )
    };

    let (sxx_z_inv, ridged) = gram_inverse(&s_xx_z);
    regularized |= ridged;
    let a_full = &s_yx_z * &sxx_z_inv;
    let explained = symmetrize(&(&a_full * s_yx_z.transpose()));

    let mut floored = false;
    let (w_half, w_inv_half) = match eigen {
        EigenWeight::Identity => (None, None),
        EigenWeight::Fixed(sigma) => (Some(spd_sqrt(sigma)?), Some(spd_inv_sqrt(sigma)?)),
        EigenWeight::FullRank => {
            let n = (panel.n() * d2) as f64;
            let resid = (&s_yy_z - &explained) / n;
            let scale = resid.diagonal().amax().max(f64::MIN_POSITIVE);
            let (resid, lifted) = eigen_floor(&resid, 1e-10 * scale);
            floored |= lifted;
            (Some(spd_sqrt(&resid)?), Some(spd_inv_sqrt(&resid)?))
        }
    };

    let a = if rank >= d1 {
        a_full
    } else {
        let whitened = match &w_inv_half {
            Some(wi) => wi * &explained * wi,
            None => explained,
        };
        let (_, vecs) = sym_eigen_desc(&whitened);
        let u = vecs.columns(0, rank).into_owned();
        let proj = &u * u.transpose();
        match (&w_half, &w_inv_half) {
            (Some(wh), Some(wi)) => wh * proj * wi * &a_full,
            _ => proj * &a_full,
        }
    };

    let psi = if m.p > 0 {
        (&s_yz - &a * &s_xz) * &szz_inv
    } else {
        DMatrix::zeros(d1, 0)
    };
    let b: Vec<DMatrix<f64>> = (0..k).map(|i| psi.columns(i * d1, d1).into_owned()).collect();
    let d = if constant {
        psi.columns(k * d1, d2).into_owned()
    } else {
        DMatrix::zeros(d1, d2)
    };

    // Σ R W R' = C S C' with C = [I, −A, −Ψ]
    let mut c = DMatrix::zeros(d1, 2 * d1 + m.p);
    c.view_mut((0, 0), (d1, d1)).fill_with_identity();
    c.view_mut((0, d1), (d1, d1)).copy_from(&(-&a));
    if m.p > 0 {
        c.view_mut((0, 2 * d1), (d1, m.p)).copy_from(&(-&psi));
    }
    let resid_moment = symmetrize(&(&c * &m.s * c.transpose()));

    Ok(HalfStep {
        coefs: Coefs { a, b, d },
        resid_moment,
        regularized,
        floored,
    })
}
