//! End-to-end estimation: per-estimator data preparation, starting values,
//! the ML fit and standard errors.

use nalgebra::{DMatrix, DVector};

use crate::covstruct::{
    ecm_from_structure, fix_scaling_loading, joreskog_sigma, map_emimic_ecm, map_mimic, map_tsls_mimic, mimic_from_structure, EmimicParams,
};
use crate::emimic::{self, SeriesClassification};
use crate::error::{Error, Result};
use crate::evalscore::fit_indices_from;
use crate::iv2sls;
use crate::linalg;
use crate::mlfit::{minimize, sandwich_covariance, MinimizeOptions};
use crate::model::{
    validate_spec, Cell, Dataset, Estimator, EstimationResult, FittedParams, IntegrationOrder, JoreskogStructure,
    MimicParams, ModelSpec, SeMethod,
};
use crate::simharness::bootstrap_se;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeRequest {
    None,
    /// Sandwich where an analytic formula exists, bootstrap otherwise.
    Auto,
    Sandwich,
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub minimize: MinimizeOptions,
    pub std_errors: SeRequest,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { minimize: MinimizeOptions::default(), std_errors: SeRequest::Auto, resamples: 200, seed: 1 }
    }
}

impl FitOptions {
    pub fn without_se() -> Self {
        Self { std_errors: SeRequest::None, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// (x, y): causes then indicators.
    Static,
    /// (Δx, v, z₋₁, Δy).
    Ecm { n_i1: usize, n_i0: usize },
}

/// Observed block in Σ order together with what the columns mean.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub observed: DMatrix<f64>,
    pub labels: Vec<String>,
    /// Columns loading on the latent variable (everything but the indicators).
    pub n_exog: usize,
    pub scaling: usize,
    pub layout: Layout,
    pub classification: Option<SeriesClassification>,
}

impl Prepared {
    pub fn exog(&self) -> DMatrix<f64> {
        self.observed.columns(0, self.n_exog).into_owned()
    }

    pub fn indicators(&self) -> DMatrix<f64> {
        self.observed.columns(self.n_exog, self.observed.ncols() - self.n_exog).into_owned()
    }
}

/// Replaces `cols` of `d` by their projection on [1, v].
fn instrument_columns(d: &DMatrix<f64>, cols: &[usize], v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let v1 = linalg::with_intercept(v);
    let target = linalg::select_columns(d, cols);
    let fitted = linalg::project_onto(&v1, &target)?;
    let mut out = d.clone();
    for (i, &c) in cols.iter().enumerate() {
        out.set_column(c, &fitted.column(i));
    }
    Ok(out)
}

fn prepare_static(data: &Dataset, spec: &ModelSpec, scaling: usize) -> Result<Prepared> {
    let mut x = data.select(&spec.causes)?;
    let y = data.select(&spec.indicators)?;
    if spec.estimator == Estimator::TslsMimic && !spec.endogenous_causes.is_empty() {
        let endog: Vec<usize> = (0..spec.causes.len()).filter(|&j| spec.is_endogenous(&spec.causes[j])).collect();
        let exog: Vec<&String> = spec.causes.iter().filter(|c| !spec.is_endogenous(c)).collect();
        let mut v_names: Vec<&String> = spec.instruments.iter().collect();
        v_names.extend(exog);
        let v = data.select(&v_names)?;
        x = instrument_columns(&x, &endog, &v)?;
    }
    let mut labels = spec.causes.clone();
    labels.extend(spec.indicators.iter().cloned());
    Ok(Prepared {
        observed: linalg::hstack(&[&x, &y]),
        labels,
        n_exog: spec.causes.len(),
        scaling,
        layout: Layout::Static,
        classification: None,
    })
}

fn prepare_ecm(data: &Dataset, spec: &ModelSpec, scaling: usize) -> Result<Prepared> {
    let classification = emimic::classify_integration(data, spec)?;
    let design = emimic::build_ecm_design(data, spec, &classification)?;
    let (n_i1, n_i0) = (design.i1_causes.len(), design.i0_causes.len());
    let mut d = linalg::hstack(&[&design.dx, &design.v, &design.z_lag]);
    if spec.estimator == Estimator::TslsEmimic && !spec.endogenous_causes.is_empty() {
        let ranges = data.series_ranges();
        let order: Vec<&String> = design.i1_causes.iter().chain(&design.i0_causes).collect();
        let endog: Vec<usize> = (0..order.len()).filter(|&j| spec.is_endogenous(order[j])).collect();
        let w = data.select(&spec.instruments)?;
        let mut blocks = Vec::new();
        // Differenced causes are instrumented by differenced instruments,
        // stationary ones by instrument levels; z₋₁ is predetermined.
        if endog.iter().any(|&j| j < n_i1) {
            blocks.push(emimic::difference_within(&w, &ranges));
        }
        if endog.iter().any(|&j| j >= n_i1) {
            blocks.push(emimic::align_rows(&w, &ranges, false));
        }
        let exog: Vec<usize> = (0..d.ncols()).filter(|j| !endog.contains(j)).collect();
        blocks.push(linalg::select_columns(&d, &exog));
        let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
        d = instrument_columns(&d, &endog, &linalg::hstack(&refs))?;
    }
    let labels = design.labels();
    Ok(Prepared {
        observed: linalg::hstack(&[&d, &design.dy]),
        labels,
        n_exog: d.ncols(),
        scaling,
        layout: Layout::Ecm { n_i1, n_i0 },
        classification: Some(classification),
    })
}

/// Builds the observed block the estimator fits. Validates the spec first.
pub fn prepare(data: &Dataset, spec: &ModelSpec) -> Result<Prepared> {
    let v = validate_spec(spec, data)?;
    match spec.estimator {
        Estimator::Mimic | Estimator::TslsMimic => prepare_static(data, spec, v.scaling_pos),
        Estimator::Dmimic => prepare_static(&emimic::dmimic_transform(data, spec)?, spec, v.scaling_pos),
        Estimator::Emimic | Estimator::TslsEmimic => prepare_ecm(data, spec, v.scaling_pos),
    }
}

#[derive(Debug, Clone)]
struct Start {
    coefs: DVector<f64>,
    loadings: DVector<f64>,
    theta: DVector<f64>,
    phi: DMatrix<f64>,
}

/// First-pass values: OLS of the indicators on the exogenous block, IV
/// loadings on the residuals, and the GLS combination of the reduced form
/// for the latent coefficients.
fn start_values(d: &DMatrix<f64>, y: &DMatrix<f64>, scaling: usize) -> Result<Start> {
    let (_, phi) = linalg::covariance(d);
    let dc = linalg::center_columns(d);
    let yc = linalg::center_columns(y);
    let n = y.nrows() as f64;
    let b = linalg::least_squares(&dc, &yc)?;
    let resid = &yc - &dc * &b;
    let r = DVector::from_fn(y.ncols(), |j, _| resid.column(j).norm_squared() / n);
    let rs = r[scaling];
    let iv = iv2sls::iv_loadings_from(&resid, scaling).ok().filter(|l| {
        l.loadings.iter().all(|v| v.is_finite() && *v > 0.05) && l.latent_variance.is_finite()
    });
    let (ratios, latent) = match iv {
        Some(l) => (l.loadings, l.latent_variance.clamp(0.1 * rs, 0.9 * rs)),
        None => (DVector::from_element(y.ncols(), 1.0), 0.5 * rs),
    };
    let loadings = ratios * latent.sqrt();
    let theta = DVector::from_fn(y.ncols(), |j, _| (r[j] - loadings[j] * loadings[j]).max(0.1 * r[j]).sqrt());
    let mut omega = &loadings * loadings.transpose() + DMatrix::from_diagonal(&theta.map(|t| t * t));
    linalg::mirror_upper(&mut omega);
    let omega_inv = linalg::spd_inverse(&omega, "Omega")?;
    let kappa2 = loadings.dot(&(&omega_inv * &loadings));
    let coefs = iv2sls::alpha_star(&b, &omega_inv, &loadings, kappa2)?;
    Ok(Start { coefs, loadings, theta, phi })
}

fn template(prep: &Prepared, estimator: Estimator, s: Start) -> Result<JoreskogStructure> {
    let mut tmpl = match prep.layout {
        Layout::Static => {
            let params = MimicParams { alpha: s.coefs, beta: s.loadings, theta_diag: s.theta, phi: s.phi, sigma2: 1.0 };
            if estimator == Estimator::TslsMimic {
                let phi_star = params.phi.clone();
                map_tsls_mimic(&params, &phi_star)?
            } else {
                map_mimic(&params)?
            }
        }
        Layout::Ecm { n_i1: k, n_i0: r } => {
            let p = s.loadings.len();
            let q = k + r;
            let params = EmimicParams {
                gamma_star: DVector::zeros(k),
                tau: DVector::zeros(r),
                lambda: s.loadings,
                psi: 1.0,
                theta_diag: s.theta,
                phi1_star: DMatrix::zeros(k, k),
                phi2: s.phi.view((k, k), (r, r)).into_owned(),
                n_mat: DMatrix::zeros(k, r),
                alpha_delta: s.coefs.rows(0, k).into_owned(),
                beta_delta: s.coefs.rows(k, r).into_owned(),
                kappa_star: s.coefs.rows(q, p).into_owned(),
                phi3_star: s.phi.view((0, 0), (k, k)).into_owned(),
                m_star: s.phi.view((k, 0), (r, k)).into_owned(),
                omega_star: s.phi.view((q, q), (p, p)).into_owned(),
            };
            map_emimic_ecm(&params)?
        }
    };
    fix_scaling_loading(&mut tmpl, prep.scaling)?;
    Ok(tmpl)
}

fn parameter_labels(s: &JoreskogStructure, labels: &[String], n_exog: usize) -> Vec<String> {
    s.free_cells()
        .into_iter()
        .map(|c| match c {
            Cell::B(i, _) => format!("loading[{}]", labels[i]),
            Cell::Lambda(_, j) => format!("coef[{}]", labels[j]),
            Cell::Phi(i, j) if i == j => format!("var[{}]", labels[i]),
            Cell::Phi(i, j) => format!("cov[{},{}]", labels[i], labels[j]),
            Cell::Theta(i) => format!("theta[{}]", labels[i]),
            Cell::Psi(i) if i == n_exog => "psi[latent]".to_string(),
            Cell::Psi(i) => format!("psi[{}]", labels[i]),
        })
        .collect()
}

/// Spec with every cause's integration order pinned to the classification
/// already made, so refits on resampled data use the same design.
pub fn pinned_spec(spec: &ModelSpec, prep: &Prepared) -> ModelSpec {
    let mut out = spec.clone();
    if let Some(c) = &prep.classification {
        for s in &c.causes {
            out.integration_order.insert(s.label.clone(), s.order);
        }
    }
    out
}

/// Fits `spec` to `data` with the estimator named in the spec.
pub fn fit(data: &Dataset, spec: &ModelSpec, opts: &FitOptions) -> Result<EstimationResult> {
    let prep = prepare(data, spec)?;
    let mut result = fit_prepared(&prep, spec.estimator, &opts.minimize)?;
    let method = match (opts.std_errors, spec.estimator) {
        (SeRequest::None, _) => None,
        (SeRequest::Sandwich, Estimator::TslsEmimic) => {
            return Err(Error::InvalidData(
                "no analytic covariance is available for TSLS_EMIMIC; request bootstrap standard errors".into(),
            ))
        }
        (SeRequest::Auto, Estimator::TslsEmimic) | (SeRequest::Bootstrap, _) => Some(SeMethod::Bootstrap),
        (SeRequest::Auto | SeRequest::Sandwich, _) => Some(SeMethod::Sandwich),
    };
    match method {
        Some(SeMethod::Sandwich) => {
            let sw = sandwich_covariance(&result.structure, &prep.observed)?;
            result.std_errors = Some(sw.std_errors);
        }
        Some(SeMethod::Bootstrap) => {
            let pinned = pinned_spec(spec, &prep);
            let bs = bootstrap_se(data, &pinned, opts.resamples, opts.seed, &opts.minimize)?;
            result.std_errors = Some(bs.std_errors);
        }
        None => {}
    }
    result.se_method = method;
    Ok(result)
}

/// ML fit of an already prepared observed block, without standard errors.
pub fn fit_prepared(prep: &Prepared, estimator: Estimator, opts: &MinimizeOptions) -> Result<EstimationResult> {
    let d = prep.exog();
    let y = prep.indicators();
    let (_, t) = linalg::covariance(&prep.observed);
    let start = start_values(&d, &y, prep.scaling)?;
    let tmpl = template(prep, estimator, start)?;
    let m = minimize(&tmpl, &t, opts)?;
    let structure = m.structure;
    let params = match prep.layout {
        Layout::Static => FittedParams::Mimic(mimic_from_structure(&structure)),
        Layout::Ecm { n_i1, n_i0 } => FittedParams::Emimic(ecm_from_structure(&structure, n_i1, n_i0)),
    };
    let implied_sigma = joreskog_sigma(&structure)?;
    let estimates = structure.pack();
    let n_obs = prep.observed.nrows();
    let fit = match fit_indices_from(&implied_sigma, &t, estimates.len(), n_obs) {
        Ok(f) => Some(f),
        Err(Error::ZeroDf) => None,
        Err(e) => return Err(e),
    };
    Ok(EstimationResult {
        estimator,
        observed: prep.labels.clone(),
        labels: parameter_labels(&structure, &prep.labels, prep.n_exog),
        params,
        structure,
        estimates,
        std_errors: None,
        se_method: None,
        implied_sigma,
        sample_cov: t,
        n_obs,
        objective_value: m.value,
        converged: m.converged,
        iterations: m.iterations,
        fit,
    })
}

/// Integration orders used by a fitted error-correction model, in cause order.
pub fn integration_orders(prep: &Prepared) -> Vec<(String, IntegrationOrder)> {
    prep.classification
        .as_ref()
        .map(|c| c.causes.iter().map(|s| (s.label.clone(), s.order)).collect())
        .unwrap_or_default()
}
