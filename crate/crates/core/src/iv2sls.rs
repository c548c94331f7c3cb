//! Instrumental-variable machinery: projections, single-equation 2SLS,
//! instrument selection and the first-stage quantities that feed the
//! 2SLS-MIMIC fit.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, mirror_upper};
use crate::model::{Dataset, ModelSpec};

/// P_X = X(X'X)⁻¹X'. Materializes an N×N matrix; the estimators never call
/// this and project through a QR factor instead.
pub fn projection_matrix(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (q, _) = linalg::thin_qr(x)?;
    let mut p = &q * q.transpose();
    mirror_upper(&mut p);
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TslsFit {
    /// Second-stage coefficients, in the column order of the regressors.
    pub a_hat: DVector<f64>,
    /// First-stage fitted regressors P_V Z.
    pub z_hat: DMatrix<f64>,
    /// s×r first-stage coefficients of Z on V.
    pub first_stage_coefs: DMatrix<f64>,
    /// y − ZÂ (structural residuals, using the observed regressors).
    pub residuals: DVector<f64>,
    pub instrument_count: usize,
    pub regressor_count: usize,
}

/// Regresses `y` on the projection of `z` onto the column space of the
/// instruments `v`. Both `z` and `v` carry their own intercept column if one
/// is wanted.
pub fn two_stage_least_squares(y: &DVector<f64>, z: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<TslsFit> {
    let (n, r) = z.shape();
    let s = v.ncols();
    if y.len() != n || v.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "y has {} rows, Z {n}, V {}",
            y.len(),
            v.nrows()
        )));
    }
    if s < r {
        return Err(Error::Underidentified(format!("{s} instruments for {r} regressors")));
    }
    let first_stage_coefs = linalg::least_squares(v, z)?;
    let z_hat = v * &first_stage_coefs;
    let ym = DMatrix::from_column_slice(n, 1, y.as_slice());
    let a_hat = linalg::least_squares(&z_hat, &ym)?.column(0).into_owned();
    let residuals = y - z * &a_hat;
    Ok(TslsFit { a_hat, z_hat, first_stage_coefs, residuals, instrument_count: s, regressor_count: r })
}

/// Instrument pool for one MIMIC equation, after replacing the latent
/// variable by the scaling indicator.
///
/// Equation 0 is the structural equation (scaling indicator on the causes);
/// equation j ≥ 1 is the measurement equation of the j-th non-scaling
/// indicator on the scaling indicator. The pool lists declared instruments,
/// then exogenous causes, then (measurement equations only) the remaining
/// indicators, each in spec order.
pub fn select_instruments(spec: &ModelSpec, equation: usize) -> Result<Vec<String>> {
    let scaling = spec.scaling();
    let others: Vec<&String> = spec.indicators.iter().filter(|i| *i != scaling).collect();
    if equation > others.len() {
        return Err(Error::InvalidData(format!(
            "equation {equation} out of range; the model has {} equations",
            others.len() + 1
        )));
    }
    let mut pool: Vec<String> = Vec::new();
    let mut push = |l: &String| {
        if !pool.contains(l) {
            pool.push(l.clone());
        }
    };
    spec.instruments.iter().for_each(&mut push);
    spec.causes.iter().filter(|c| !spec.is_endogenous(c)).for_each(&mut push);
    let regressors = if equation == 0 {
        spec.causes.len()
    } else {
        let own = others[equation - 1];
        others.iter().filter(|o| **o != own).for_each(|o| push(o));
        1
    };
    if pool.len() < regressors {
        return Err(Error::Underidentified(format!(
            "equation {equation} has {regressors} regressor(s) but only {} instrument(s)",
            pool.len()
        )));
    }
    Ok(pool)
}

/// Φ* = X'P_W X, with W = X when no instruments are given (then Φ* = X'X).
/// Not divided by N.
pub fn phi_star(x: &DMatrix<f64>, instruments: Option<&DMatrix<f64>>) -> Result<DMatrix<f64>> {
    let projected = linalg::project_onto(instruments.unwrap_or(x), x)?;
    let mut phi = x.tr_mul(&projected);
    mirror_upper(&mut phi);
    Ok(phi)
}

/// Instrumented reduced-form coefficients (X'P_W X)⁻¹X'P_W Y, q×p.
pub fn instrumented_coefficients(x: &DMatrix<f64>, y: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let x_hat = linalg::project_onto(w, x)?;
    linalg::least_squares(&x_hat, y)
}

/// α* = PΩ⁻¹β/κ².
pub fn alpha_star(p_mat: &DMatrix<f64>, omega_inv: &DMatrix<f64>, beta: &DVector<f64>, kappa2: f64) -> Result<DVector<f64>> {
    if p_mat.ncols() != omega_inv.nrows() || omega_inv.ncols() != beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "P is {:?}, Omega^-1 is {:?}, beta has {}",
            p_mat.shape(),
            omega_inv.shape(),
            beta.len()
        )));
    }
    if !(kappa2 > 0.0) {
        return Err(Error::InvalidData(format!("kappa^2 must be positive, got {kappa2}")));
    }
    Ok(p_mat * omega_inv * beta / kappa2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loadings {
    /// Loadings with the scaling indicator's entry equal to 1.
    pub loadings: DVector<f64>,
    /// Latent variance on the scaling indicator's scale.
    pub latent_variance: f64,
}

/// IV loadings of the indicator block `y` (N×p): each non-scaling indicator
/// is regressed on the scaling indicator using the remaining indicators as
/// instruments.
pub fn iv_loadings_from(y: &DMatrix<f64>, scaling: usize) -> Result<Loadings> {
    let (n, p) = y.shape();
    if p < 3 {
        return Err(Error::Underidentified(format!("{p} indicators; IV loadings need at least 3")));
    }
    let ones = DMatrix::from_element(n, 1, 1.0);
    let ys = y.column(scaling).into_owned();
    let z = linalg::hstack(&[&ones, &DMatrix::from_column_slice(n, 1, ys.as_slice())]);
    let mut loadings = DVector::from_element(p, 1.0);
    for j in (0..p).filter(|&j| j != scaling) {
        let rest: Vec<usize> = (0..p).filter(|&k| k != j && k != scaling).collect();
        let v = linalg::hstack(&[&ones, &linalg::select_columns(y, &rest)]);
        let fit = two_stage_least_squares(&y.column(j).into_owned(), &z, &v)?;
        loadings[j] = fit.a_hat[1];
    }
    let (_, cov) = linalg::covariance(y);
    let terms: Vec<f64> = (0..p).filter(|&k| k != scaling).map(|k| cov[(scaling, k)] / loadings[k]).collect();
    let latent_variance = terms.iter().sum::<f64>() / terms.len() as f64;
    Ok(Loadings { loadings, latent_variance })
}

pub fn iv_loadings(data: &Dataset, spec: &ModelSpec) -> Result<Loadings> {
    let y = data.select(&spec.indicators)?;
    let scaling = spec
        .indicators
        .iter()
        .position(|i| i == spec.scaling())
        .ok_or_else(|| Error::UnknownColumn(spec.scaling().to_string()))?;
    iv_loadings_from(&y, scaling)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Estimator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gauss(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn projection_examples() {
        let p = projection_matrix(&DMatrix::identity(4, 4)).unwrap();
        assert!((p - DMatrix::identity(4, 4)).amax() < 1e-14);
        let p = projection_matrix(&DMatrix::from_element(2, 1, 1.0)).unwrap();
        assert!((p - DMatrix::from_element(2, 2, 0.5)).amax() < 1e-15);
    }

    #[test]
    fn projection_is_idempotent_with_trace_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = gauss(&mut rng, 20, 3);
        let p = projection_matrix(&x).unwrap();
        assert_eq!(p, p.transpose());
        assert!((&p * &p - &p).amax() < 1e-10);
        assert!((&p * &x - &x).amax() < 1e-10);
        assert!((p.trace() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn collinear_projection_is_rank_deficient() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(projection_matrix(&x), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn own_instruments_reduce_to_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = linalg::with_intercept(&gauss(&mut rng, 40, 2));
        let y = gauss(&mut rng, 40, 1).column(0).into_owned();
        let fit = two_stage_least_squares(&y, &z, &z).unwrap();
        let ols = linalg::least_squares(&z, &DMatrix::from_column_slice(40, 1, y.as_slice())).unwrap();
        assert!((fit.a_hat - ols.column(0)).amax() < 1e-10);
    }

    #[test]
    fn exactly_identified_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = linalg::with_intercept(&gauss(&mut rng, 60, 2));
        let z = linalg::with_intercept(&(&v.columns(1, 2) * 0.7 + gauss(&mut rng, 60, 2)));
        let y = (&z * DVector::from_vec(vec![1.0, 0.5, -0.3])) + gauss(&mut rng, 60, 1).column(0);
        let fit = two_stage_least_squares(&y, &z, &v).unwrap();
        let direct = (v.transpose() * &z).lu().solve(&(v.transpose() * &y)).unwrap();
        assert!((&fit.a_hat - direct).amax() < 1e-8);
        assert!((v.transpose() * &fit.residuals).amax() < 1e-8);
    }

    #[test]
    fn too_few_instruments_is_underidentified() {
        let z = DMatrix::from_element(5, 2, 1.0);
        let v = DMatrix::from_element(5, 1, 1.0);
        let y = DVector::zeros(5);
        assert!(matches!(two_stage_least_squares(&y, &z, &v), Err(Error::Underidentified(_))));
    }

    #[test]
    fn two_stage_beats_ols_under_endogeneity() {
        let n = 50;
        let mut wins = 0;
        for rep in 0..500 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + rep);
            let w = gauss(&mut rng, n, 1);
            let vv = gauss(&mut rng, n, 1);
            let e = gauss(&mut rng, n, 1);
            let zc = &w + &vv;
            let u = &vv * 0.8 + &e * 0.6;
            let y = (zc.column(0) * 2.0).add_scalar(1.0) + u.column(0);
            let z = linalg::with_intercept(&zc);
            let v = linalg::with_intercept(&w);
            let iv = two_stage_least_squares(&y, &z, &v).unwrap().a_hat[1];
            let ols = linalg::least_squares(&z, &DMatrix::from_column_slice(n, 1, y.as_slice())).unwrap()[(1, 0)];
            if (iv - 2.0).abs() < (ols - 2.0).abs() {
                wins += 1;
            }
        }
        assert!(wins >= 450, "2SLS closer in {wins}/500");
    }

    #[test]
    fn instrument_pools() {
        let exo = ModelSpec::new(["y1", "y2", "y3"], ["x1", "x2"], Estimator::Mimic);
        assert_eq!(select_instruments(&exo, 0).unwrap(), vec!["x1", "x2"]);
        assert_eq!(select_instruments(&exo, 1).unwrap(), vec!["x1", "x2", "y3"]);

        let endo = ModelSpec::new(["y1", "y2"], ["x1", "x2"], Estimator::TslsMimic)
            .with_endogenous(["x1"])
            .with_instruments(["w1", "w2"]);
        assert_eq!(select_instruments(&endo, 0).unwrap(), vec!["w1", "w2", "x2"]);

        let short = ModelSpec::new(["y1", "y2"], ["x1", "x2"], Estimator::TslsMimic)
            .with_endogenous(["x1", "x2"])
            .with_instruments(["w1"]);
        assert!(matches!(select_instruments(&short, 0), Err(Error::Underidentified(_))));
    }

    #[test]
    fn phi_star_without_instruments_is_cross_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = gauss(&mut rng, 30, 3);
        let phi = phi_star(&x, None).unwrap();
        assert!((phi - x.tr_mul(&x)).amax() < 1e-10);
    }

    #[test]
    fn scalar_alpha_star_is_latent_iv_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200;
        let w = gauss(&mut rng, n, 1);
        let x = &w * 0.8 + gauss(&mut rng, n, 1);
        let y = &x * 1.5 + gauss(&mut rng, n, 1);
        let p = instrumented_coefficients(&x, &y, &w).unwrap();
        let slope = (x.tr_mul(&linalg::project_onto(&w, &y).unwrap()))[0]
            / (x.tr_mul(&linalg::project_onto(&w, &x).unwrap()))[0];
        let (beta, theta2) = (1.0, 0.4);
        let omega = beta * beta + theta2;
        let kappa2 = beta * beta / omega;
        let a = alpha_star(&p, &DMatrix::from_element(1, 1, 1.0 / omega), &DVector::from_element(1, beta), kappa2).unwrap();
        assert!((a[0] - slope).abs() < 1e-10);
    }

    #[test]
    fn alpha_star_vanishes_for_orthogonal_beta() {
        let p = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let beta = DVector::from_vec(vec![1.0, -1.0]);
        let a = alpha_star(&p, &DMatrix::identity(2, 2), &beta, 0.5).unwrap();
        assert_eq!(a[0], 0.0);
    }

    #[test]
    fn noiseless_loadings_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let eta = gauss(&mut rng, 100, 1);
        let lam = [1.0, 0.8, 0.6];
        let y = DMatrix::from_fn(100, 3, |i, j| lam[j] * eta[i]);
        let l = iv_loadings_from(&y, 0).unwrap();
        for j in 0..3 {
            assert!((l.loadings[j] - lam[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn two_indicators_are_underidentified() {
        let y = DMatrix::from_element(10, 2, 1.0);
        assert!(matches!(iv_loadings_from(&y, 0), Err(Error::Underidentified(_))));
    }

    #[test]
    fn loadings_recovered_at_large_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 5000;
        let eta = gauss(&mut rng, n, 1);
        let noise = gauss(&mut rng, n, 3);
        let lam = [1.0, 0.8, 0.6];
        let y = DMatrix::from_fn(n, 3, |i, j| lam[j] * eta[i] + 0.5 * noise[(i, j)]);
        let l = iv_loadings_from(&y, 0).unwrap();
        for j in 0..3 {
            assert!((l.loadings[j] - lam[j]).abs() < 0.05);
        }
        assert!((l.latent_variance - 1.0).abs() < 0.1);
    }
}
