//! Dense numerical helpers: rank-revealing spans, projections and a
//! nonnegative least-squares solver used for cone membership.

use nalgebra::{DMatrix, DVector};

/// Singular values below `RANK_TOL * sigma_max` count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Stacks vectors as the columns of an `n x m` matrix.
pub fn columns(n: usize, vectors: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

fn singular_values(n: usize, vectors: &[DVector<f64>]) -> Vec<f64> {
    if vectors.is_empty() || n == 0 {
        return Vec::new();
    }
    let m = columns(n, vectors);
    m.singular_values().iter().copied().collect()
}

/// Dimension of the linear span of `vectors` in `R^n`.
pub fn rank(n: usize, vectors: &[DVector<f64>], rel_tol: f64) -> usize {
    let sv = singular_values(n, vectors);
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max <= f64::MIN_POSITIVE {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Orthonormal basis of the span of `vectors`.
pub fn orthonormal_basis(n: usize, vectors: &[DVector<f64>], rel_tol: f64) -> Vec<DVector<f64>> {
    if vectors.is_empty() || n == 0 {
        return Vec::new();
    }
    let m = columns(n, vectors);
    let svd = m.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if max <= f64::MIN_POSITIVE {
        return Vec::new();
    }
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > rel_tol * max)
        .map(|(j, _)| u.column(j).into_owned())
        .collect()
}

/// Orthogonal projection of `v` onto the span of an orthonormal basis.
pub fn project(basis: &[DVector<f64>], v: &DVector<f64>) -> DVector<f64> {
    let mut p = DVector::zeros(v.len());
    for b in basis {
        p.axpy(b.dot(v), b, 1.0);
    }
    p
}

/// Norm of the component of `v` orthogonal to an orthonormal basis.
pub fn residual(basis: &[DVector<f64>], v: &DVector<f64>) -> f64 {
    (v - project(basis, v)).norm()
}

/// Moore-Penrose pseudo-inverse with a relative singular-value cutoff.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = (RANK_TOL * max).max(f64::MIN_POSITIVE);
    svd.pseudo_inverse(eps).expect("eps is positive")
}

/// Solves `min |A x - b|` subject to `x >= 0` (Lawson-Hanson active set).
///
/// Returns `None` if the iteration cap is hit, which callers report as an
/// undecided result rather than a negative one.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let (m, n) = a.shape();
    let mut x = DVector::zeros(n);
    if n == 0 {
        return Some(x);
    }
    let scale = a.norm().max(1.0) * b.norm().max(1.0);
    let tol = 1e-13 * scale * (m.max(n) as f64);
    let mut passive = vec![false; n];
    let max_outer = 3 * n + 30;

    let gradient = |x: &DVector<f64>| a.transpose() * (b - a * x);

    for _ in 0..max_outer {
        let w = gradient(&x);
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let t = match candidate {
            Some(t) if w[t] > tol => t,
            _ => return Some(x),
        };
        passive[t] = true;

        let mut inner = 0;
        loop {
            inner += 1;
            if inner > 3 * n + 30 {
                return None;
            }
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let ap = a.select_columns(&idx);
            let sp = lstsq(&ap, b)?;
            if sp.iter().all(|&s| s > 0.0) {
                x.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = sp[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if sp[k] <= 0.0 {
                    let denom = x[j] - sp[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            if !alpha.is_finite() {
                return None;
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (sp[k] - x[j]);
            }
            for &j in &idx {
                if x[j] <= 1e-15 * scale.max(1.0) {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    None
}

fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = (1e-12 * max).max(f64::MIN_POSITIVE);
    svd.solve(b, eps).ok()
}
