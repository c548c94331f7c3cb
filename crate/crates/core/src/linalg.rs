//! Dense linear-algebra helpers shared by the estimators.
//!
//! Every solve goes through a factorization (Cholesky for SPD systems,
//! Householder QR for least squares). Explicit inverses are only formed for
//! small SPD matrices where the inverse itself is the quantity of interest.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative rank tolerance applied against the largest diagonal of X'X.
pub const RANK_TOL: f64 = 1e-10;

/// Exact symmetrization: copies the upper triangle onto the lower one.
pub fn mirror_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            m[(i, j)] = m[(j, i)];
        }
    }
}

pub fn cholesky(m: &DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite(what));
    }
    Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite(what))
}

pub fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

pub fn spd_inverse(m: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    let mut inv = cholesky(m, what)?.inverse();
    mirror_upper(&mut inv);
    Ok(inv)
}

/// Column means and the 1/N centered cross-product matrix.
pub fn covariance(data: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = data.nrows();
    let means = DVector::from_iterator(data.ncols(), data.column_iter().map(|c| c.mean()));
    let mut centered = data.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    let mut cov = centered.tr_mul(&centered) / n as f64;
    mirror_upper(&mut cov);
    (means, cov)
}

pub fn center_columns(data: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = data.clone();
    for mut col in out.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    out
}

/// Thin Householder QR with a rank check. Returns (Q, R).
pub fn thin_qr(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, k) = x.shape();
    if n < k {
        return Err(Error::RankDeficient(format!("{n} rows for {k} columns")));
    }
    let max_diag = x.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max);
    if max_diag == 0.0 {
        return Err(Error::RankDeficient("all-zero design".into()));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    for i in 0..k {
        if r[(i, i)] * r[(i, i)] <= RANK_TOL * max_diag {
            return Err(Error::RankDeficient(format!("column {i} is (nearly) collinear")));
        }
    }
    Ok((qr.q(), r))
}

/// Least-squares coefficients for every column of `y` regressed on `x`.
pub fn least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows, response has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    let (q, r) = thin_qr(x)?;
    let qty = q.tr_mul(y);
    r.solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient("triangular solve failed".into()))
}

/// P_V · Z without materializing the N×N projection.
pub fn project_onto(v: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if v.nrows() != z.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "projection basis has {} rows, target has {}",
            v.nrows(),
            z.nrows()
        )));
    }
    let (q, _) = thin_qr(v)?;
    Ok(&q * q.tr_mul(z))
}

pub fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

/// Columns `idx` of `m`, in the given order.
pub fn select_columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), idx.len(), |i, j| m[(i, idx[j])])
}

pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let k: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(n, k);
    let mut off = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), n);
        out.view_mut((0, off), (n, b.ncols())).copy_from(b);
        off += b.ncols();
    }
    out
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
