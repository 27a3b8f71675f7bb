//! Dense linear-algebra vocabulary shared by every estimator: column-major
//! vectorization, Kronecker products, projections, symmetric square roots and
//! eigenvalue utilities.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{CmarError, Result};

/// Relative singular-value threshold used for every rank decision.
pub const RANK_RTOL: f64 = 1e-12;

/// Kronecker product `a ⊗ b`.
///
/// `out[(i*p + s, j*q + t)] = a[(i, j)] * b[(s, t)]` for `b` of shape `p×q`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    let (p, q) = b.shape();
    let mut out = DMatrix::zeros(m * p, n * q);
    for j in 0..n {
        for i in 0..m {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for t in 0..q {
                for s in 0..p {
                    out[(i * p + s, j * q + t)] = aij * b[(s, t)];
                }
            }
        }
    }
    out
}

/// Column-major stacking of `x` into a vector.
pub fn vec(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(x.as_slice())
}

/// Inverse of [`vec`]: reshapes a length `m*n` vector into an `m×n` matrix.
pub fn vec_inverse(v: &DVector<f64>, m: usize, n: usize) -> Result<DMatrix<f64>> {
    if v.len() != m * n {
        return Err(CmarError::Shape(format!(
            "cannot reshape vector of length {} into {m}x{n}",
            v.len()
        )));
    }
    Ok(DMatrix::from_column_slice(m, n, v.as_slice()))
}

/// Orthogonal projection onto the column space of `beta`, `β(β'β)⁻¹β'`.
pub fn projection(beta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r = beta.ncols();
    if r == 0 {
        return Ok(DMatrix::zeros(beta.nrows(), beta.nrows()));
    }
    if numerical_rank(beta) < r {
        return Err(CmarError::Singular(format!(
            "projection basis {}x{} is rank deficient",
            beta.nrows(),
            r
        )));
    }
    let gram = beta.transpose() * beta;
    let inv = gram
        .cholesky()
        .ok_or_else(|| CmarError::Singular("β'β not positive definite".into()))?
        .inverse();
    let p = beta * inv * beta.transpose();
    Ok(symmetrize(&p))
}

/// Number of singular values above `RANK_RTOL * σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    rank_with_tol(m, RANK_RTOL)
}

pub fn rank_with_tol(m: &DMatrix<f64>, rtol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rtol * max).count()
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Complex eigenvalues of a general real square matrix via the real Schur form.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if m.nrows() != m.ncols() {
        return Err(CmarError::Shape(format!(
            "eigenvalues of non-square {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.is_empty() {
        return Ok(Vec::new());
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(CmarError::Numerical("non-finite matrix entry".into()));
    }
    // Shifted QR can stall on clustered eigenvalues (unit roots) or cycle without
    // deflating; a looser deflation test or an orthogonal similarity breaks both.
    let n = m.nrows();
    let reflector = DMatrix::identity(n, n) - {
        let v = DVector::from_fn(n, |i, _| 1.0 + i as f64 / n as f64);
        &v * v.transpose() * (2.0 / v.norm_squared())
    };
    let candidates = [m.clone(), &reflector * m * &reflector];
    let schur = candidates
        .iter()
        .flat_map(|c| [1.0, 8.0, 64.0].map(|f| (c, f)))
        .find_map(|(c, f)| c.clone().try_schur(f * f64::EPSILON, 10_000))
        .ok_or_else(|| CmarError::Numerical("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok(quasi_triangular_eigenvalues(&t))
}

/// Eigenvalues of a real quasi-upper-triangular matrix, block by block. The
/// 2×2 blocks are not assumed to be in standard form, so they may carry real pairs.
fn quasi_triangular_eigenvalues(t: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let n = t.nrows();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 == n || t[(i + 1, i)] == 0.0 {
            out.push(Complex::new(t[(i, i)], 0.0));
            i += 1;
            continue;
        }
        let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
        let mid = 0.5 * (a + d);
        let half = 0.5 * (a - d);
        let disc = half * half + b * c;
        if disc >= 0.0 {
            let root = disc.sqrt();
            // larger-magnitude root directly, the other from the determinant
            let big = if mid >= 0.0 { mid + root } else { mid - root };
            let small = if big != 0.0 { (a * d - b * c) / big } else { 0.0 };
            out.push(Complex::new(big, 0.0));
            out.push(Complex::new(small, 0.0));
        } else {
            let im = (-disc).sqrt();
            out.push(Complex::new(mid, im));
            out.push(Complex::new(mid, -im));
        }
        i += 2;
    }
    out
}

/// `max |λ|` over the eigenvalues of `m`.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetric eigendecomposition sorted by decreasing eigenvalue.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `m^p` for a symmetric positive-definite `m`, computed spectrally.
pub fn spd_power(m: &DMatrix<f64>, p: f64) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen_desc(m);
    if vals.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(CmarError::Covariance(format!(
            "smallest eigenvalue {:e}",
            vals.iter().cloned().fold(f64::INFINITY, f64::min)
        )));
    }
    let scaled = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, j)] * vals[j].powf(p));
    Ok(symmetrize(&(scaled * vecs.transpose())))
}

pub fn spd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spd_power(m, 0.5)
}

pub fn spd_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spd_power(m, -0.5)
}

pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| symmetrize(&c.inverse()))
        .ok_or_else(|| CmarError::Covariance("Cholesky factorization failed".into()))
}

/// Raises every eigenvalue of a symmetric matrix to at least `floor`.
/// Returns the repaired matrix and whether any eigenvalue was lifted.
pub fn eigen_floor(m: &DMatrix<f64>, floor: f64) -> (DMatrix<f64>, bool) {
    let (vals, vecs) = sym_eigen_desc(m);
    if vals.iter().all(|&v| v >= floor) {
        return (symmetrize(m), false);
    }
    let fixed = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, j)] * vals[j].max(floor));
    (symmetrize(&(fixed * vecs.transpose())), true)
}

/// Inverse of a symmetric positive semi-definite Gram matrix.
///
/// When the smallest eigenvalue falls below `RANK_RTOL` times the largest, a
/// ridge `1e-10 * trace / dim` is added first; the returned flag reports it.
pub fn gram_inverse(g: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let n = g.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), false);
    }
    let g = symmetrize(g);
    let (vals, _) = sym_eigen_desc(&g);
    let max = vals[0];
    let min = vals[n - 1];
    let healthy = max > 0.0 && min > RANK_RTOL * max;
    if healthy {
        if let Some(c) = g.clone().cholesky() {
            return (symmetrize(&c.inverse()), false);
        }
    }
    let mut lambda = 1e-10 * g.trace() / n as f64;
    if !(lambda > 0.0) {
        lambda = 1e-10;
    }
    let mut ridged = g.clone();
    loop {
        for i in 0..n {
            ridged[(i, i)] = g[(i, i)] + lambda;
        }
        if let Some(c) = ridged.clone().cholesky() {
            return (symmetrize(&c.inverse()), true);
        }
        lambda *= 10.0;
    }
}

/// Index of the entry with the largest magnitude (first one on ties).
pub fn argmax_abs<'a>(values: impl Iterator<Item = &'a f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.enumerate() {
        match best {
            Some((_, b)) if v.abs() <= b => {}
            _ => best = Some((i, v.abs())),
        }
    }
    best.map(|(i, _)| i)
}

/// Flips columns so that the largest-magnitude entry of each is positive.
/// Returns the applied signs.
pub fn fix_column_signs(m: &mut DMatrix<f64>) -> Vec<f64> {
    let mut signs = Vec::with_capacity(m.ncols());
    for j in 0..m.ncols() {
        let idx = argmax_abs(m.column(j).iter()).unwrap_or(0);
        let s = if m.nrows() > 0 && m[(idx, j)] < 0.0 { -1.0 } else { 1.0 };
        if s < 0.0 {
            m.column_mut(j).neg_mut();
        }
        signs.push(s);
    }
    signs
}

/// Rank-`r` factorization `a ≈ α β'` with orthonormal, sign-fixed `β`
/// spanning the leading right singular subspace, and `α = a β`.
pub fn low_rank_factors(a: &DMatrix<f64>, r: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let r = r.min(m).min(n);
    if r == 0 {
        return (DMatrix::zeros(m, 0), DMatrix::zeros(n, 0));
    }
    let svd = a.clone().svd(true, true);
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let mut beta = DMatrix::zeros(n, r);
    for (dst, &src) in order.iter().take(r).enumerate() {
        beta.set_column(dst, &v_t.row(src).transpose());
    }
    fix_column_signs(&mut beta);
    let alpha = a * &beta;
    (alpha, beta)
}

/// Best rank-`r` approximation in Frobenius norm.
pub fn truncate_rank(a: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let (alpha, beta) = low_rank_factors(a, r);
    alpha * beta.transpose()
}

/// Orthogonal `R` minimising `‖source·R − target‖_F`.
pub fn procrustes(source: &DMatrix<f64>, target: &DMatrix<f64>) -> DMatrix<f64> {
    let m = source.transpose() * target;
    if m.is_empty() {
        return DMatrix::identity(m.nrows(), m.ncols());
    }
    let svd = m.svd(true, true);
    svd.u.expect("u requested") * svd.v_t.expect("v_t requested")
}

/// Sample covariance (divisor `n`) of a set of equally sized vectors.
pub fn outer_mean(vectors: &[DVector<f64>]) -> DMatrix<f64> {
    let d = vectors.first().map_or(0, |v| v.len());
    let mut acc = DMatrix::zeros(d, d);
    for v in vectors {
        acc.ger(1.0, v, v, 1.0);
    }
    if !vectors.is_empty() {
        acc /= vectors.len() as f64;
    }
    acc
}
