//! Fit indices, latent-score prediction and composite-index construction.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mlfit::discrepancy;
use crate::model::{Dataset, EstimationResult, MimicParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub chi2: f64,
    pub df: usize,
    pub chi2_baseline: f64,
    pub df_baseline: usize,
    pub rmsea: f64,
    pub srmr: f64,
    pub cfi: f64,
    pub n: usize,
}

pub fn rmsea(chi2: f64, df: usize, n: usize) -> f64 {
    let df = df as f64;
    ((chi2 - df).max(0.0) / (df * (n as f64 - 1.0))).sqrt()
}

pub fn srmr(sample: &DMatrix<f64>, implied: &DMatrix<f64>) -> f64 {
    let p = sample.nrows();
    let mut acc = 0.0;
    for j in 0..p {
        for i in 0..=j {
            let r = (sample[(i, j)] - implied[(i, j)]) / (sample[(i, i)] * sample[(j, j)]).sqrt();
            acc += r * r;
        }
    }
    (acc / (p * (p + 1) / 2) as f64).sqrt()
}

pub fn cfi(chi2: f64, df: usize, chi2_b: f64, df_b: usize) -> f64 {
    let d = (chi2 - df as f64).max(0.0);
    let d_b = (chi2_b - df_b as f64).max(0.0);
    let denom = d.max(d_b);
    if denom == 0.0 {
        return 1.0;
    }
    (1.0 - d / denom).clamp(0.0, 1.0)
}

/// Likelihood-ratio fit indices for an implied Σ̂ against the 1/N sample
/// matrix `t`, with the diagonal (variances-only) model as baseline.
pub fn fit_indices_from(implied: &DMatrix<f64>, t: &DMatrix<f64>, free: usize, n: usize) -> Result<FitReport> {
    let p = t.nrows();
    let moments = p * (p + 1) / 2;
    if free >= moments {
        return Err(Error::ZeroDf);
    }
    let df = moments - free;
    let df_b = moments - p;
    let log_det_t = linalg::log_det(&linalg::cholesky(t, "sample covariance")?);
    let scale = n as f64 - 1.0;
    let f_min = discrepancy(implied, t)?;
    let chi2 = (scale * (f_min - log_det_t - p as f64)).max(0.0);
    let log_det_diag: f64 = t.diagonal().iter().map(|v| v.ln()).sum();
    let chi2_b = (scale * (log_det_diag - log_det_t)).max(0.0);
    Ok(FitReport {
        chi2,
        df,
        chi2_baseline: chi2_b,
        df_baseline: df_b,
        rmsea: rmsea(chi2, df, n),
        srmr: srmr(t, implied),
        cfi: cfi(chi2, df, chi2_b, df_b),
        n,
    })
}

pub fn fit_indices(result: &EstimationResult, n: usize) -> Result<FitReport> {
    fit_indices_from(&result.implied_sigma, &result.sample_cov, result.free_count(), n)
}

/// Conditional mean of the latent variable given the causes `x` (N×q) and
/// indicators `y` (N×p): α'x + σ²β'Ω⁻¹(y − βα'x).
pub fn predict_scores(params: &MimicParams, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (q, p) = (params.n_causes(), params.n_indicators());
    if x.ncols() != q || y.ncols() != p || x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "scores need N×{q} causes and N×{p} indicators, got {:?} and {:?}",
            x.shape(),
            y.shape()
        )));
    }
    let omega = &params.beta * params.beta.transpose() * params.sigma2
        + DMatrix::from_diagonal(&params.theta_diag.map(|t| t * t));
    let w = linalg::cholesky(&omega, "Omega")?.solve(&params.beta) * params.sigma2;
    let structural = x * &params.alpha;
    let resid = y - &structural * params.beta.transpose();
    Ok(structural + resid * w)
}

/// Group means of `scores` min-max rescaled to [0, 1], keyed by group label.
pub fn build_index(scores: &DVector<f64>, groups: &[String]) -> Result<BTreeMap<String, f64>> {
    if scores.len() != groups.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {} group labels",
            scores.len(),
            groups.len()
        )));
    }
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (s, g) in scores.iter().zip(groups) {
        let e = acc.entry(g.as_str()).or_insert((0.0, 0));
        e.0 += s;
        e.1 += 1;
    }
    if acc.len() < 2 {
        return Err(Error::SingleGroup);
    }
    let means: Vec<(&str, f64)> = acc.into_iter().map(|(g, (s, n))| (g, s / n as f64)).collect();
    let lo = means.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let hi = means.iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Err(Error::InvalidData("every group has the same mean score".into()));
    }
    Ok(means.into_iter().map(|(g, m)| (g.to_string(), (m - lo) / (hi - lo))).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstStage {
    pub fitted: DVector<f64>,
    pub coefficients: DVector<f64>,
    pub r2: f64,
}

/// OLS of `endogenous` on `exogenous` plus an intercept; the fitted values
/// stand in for the observed column in a subsequent fit.
pub fn first_stage_proxy<S: AsRef<str>>(data: &Dataset, endogenous: &str, exogenous: &[S]) -> Result<FirstStage> {
    let y = data.column(endogenous)?;
    let x = linalg::with_intercept(&data.select(exogenous)?);
    if x.nrows() <= x.ncols() {
        return Err(Error::RankDeficient(format!("{} rows for {} predictors", x.nrows(), x.ncols())));
    }
    let ym = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
    let coef = linalg::least_squares(&x, &ym)?.column(0).into_owned();
    let fitted = &x * &coef;
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let rss: f64 = (&y - &fitted).norm_squared();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    Ok(FirstStage { fitted, coefficients: coef, r2 })
}
