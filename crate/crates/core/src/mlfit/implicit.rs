use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, mirror_upper};
use crate::model::MimicParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepInfo {
    pub pi2: f64,
    pub kappa2: f64,
    pub change: f64,
}

#[derive(Debug, Clone)]
pub struct ImplicitFit {
    pub params: MimicParams,
    pub sweeps: Vec<SweepInfo>,
    pub converged: bool,
}

const TOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 200;

/// Regression moments shared by every sweep.
struct Moments {
    sxx: DMatrix<f64>,
    /// OLS coefficients of y on x, q×p.
    p: DMatrix<f64>,
    /// Explained part P'SxxP.
    q: DMatrix<f64>,
    /// Residual covariance.
    s: DMatrix<f64>,
}

fn moments(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Moments> {
    let n = x.nrows() as f64;
    let xc = linalg::center_columns(x);
    let yc = linalg::center_columns(y);
    let mut sxx = xc.tr_mul(&xc) / n;
    mirror_upper(&mut sxx);
    let sxy = xc.tr_mul(&yc) / n;
    let mut syy = yc.tr_mul(&yc) / n;
    mirror_upper(&mut syy);
    let p = linalg::cholesky(&sxx, "Sxx")?.solve(&sxy);
    let mut q = sxy.tr_mul(&p);
    mirror_upper(&mut q);
    let mut s = syy - &q;
    mirror_upper(&mut s);
    Ok(Moments { sxx, p, q, s })
}

/// Top eigenpair of a symmetric matrix.
fn top_eigenvector(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = order[0];
    if order.len() > 1 {
        let (l0, l1) = (eig.eigenvalues[top], eig.eigenvalues[order[1]]);
        if (l0 - l1).abs() <= 1e-10 * l0.abs().max(1.0) {
            log::warn!("leading eigenvalue has multiplicity > 1; eigenvector choice is arbitrary");
        }
    }
    (eig.eigenvalues[top], eig.eigenvectors.column(top).into_owned())
}

/// Solves the loading eigen-problem for fixed Θ. In standardized units
/// b = Θ⁻¹β the profile objective is
/// log(1+π²) − π²/(1+π²)·u'S̃u − u'C u with b = π·u, |u| = 1, so u is the
/// leading eigenvector of S̃ + (1 + 1/π²)C and π² = u'S̃u − 1.
fn solve_loadings(m: &Moments, theta: &DVector<f64>, pi2_start: f64) -> Result<(DVector<f64>, f64)> {
    let p = theta.len();
    let st = DMatrix::from_fn(p, p, |i, j| m.s[(i, j)] / (theta[i] * theta[j]));
    let ct = DMatrix::from_fn(p, p, |i, j| m.q[(i, j)] / (theta[i] * theta[j]));
    let mut pi2 = pi2_start;
    let mut u = DVector::zeros(p);
    for _ in 0..1000 {
        let w = if pi2.is_finite() { 1.0 + 1.0 / pi2 } else { 1.0 };
        let (_, v) = top_eigenvector(&(&st + &ct * w));
        u = v;
        let a = u.dot(&(&st * &u));
        if !(a > 1.0) {
            return Err(Error::ComplexEigenvalue(format!(
                "standardized residual variance along the leading direction is {a:.6}, leaving no positive latent variance"
            )));
        }
        let next = a - 1.0;
        let done = pi2.is_finite() && (next - pi2).abs() <= 1e-13 * (1.0 + next);
        pi2 = next;
        if done {
            break;
        }
    }
    Ok((u * pi2.sqrt(), pi2))
}

fn concentrated_theta_objective(omega: &DMatrix<f64>, r: &DMatrix<f64>) -> Option<f64> {
    let chol = linalg::cholesky(omega, "Omega").ok()?;
    Some(linalg::log_det(&chol) + chol.solve(r).trace())
}

/// Alternating solution of the implicit likelihood equations of the static
/// MIMIC model (σ² = 1): loadings from the eigen-equation, cause
/// coefficients α = PΩ⁻¹β/κ², and a Fisher-scoring update of Θ².
///
/// `scaling` picks the indicator whose loading is made positive.
pub fn implicit_ml_iteration(x: &DMatrix<f64>, y: &DMatrix<f64>, scaling: usize) -> Result<ImplicitFit> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch("causes and indicators differ in row count".into()));
    }
    let (q, p) = (x.ncols(), y.ncols());
    if p < 2 || q < 1 {
        return Err(Error::Underidentified(format!("{p} indicators and {q} causes")));
    }
    if x.nrows() <= p + q {
        return Err(Error::RankDeficient(format!("{} rows for {} variables", x.nrows(), p + q)));
    }
    let m = moments(x, y)?;
    let mut theta2 = m.s.diagonal() * 0.5;
    let mut alpha = DVector::zeros(q);
    let mut beta = DVector::zeros(p);
    let mut pi2 = f64::INFINITY;
    let mut sweeps = Vec::new();
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let theta = theta2.map(f64::sqrt);
        let (mut b, new_pi2) = solve_loadings(&m, &theta, pi2)?;
        if b[scaling] < 0.0 {
            b.neg_mut();
        }
        pi2 = new_pi2;
        let kappa2 = pi2 / (1.0 + pi2);
        let new_beta = b.component_mul(&theta);
        let mut omega = &new_beta * new_beta.transpose() + DMatrix::from_diagonal(&theta2);
        mirror_upper(&mut omega);
        let omega_chol = linalg::cholesky(&omega, "Omega")?;
        let new_alpha = &m.p * omega_chol.solve(&new_beta) / kappa2;

        // Θ² scoring step with α, β held fixed.
        let resid = &m.p - &new_alpha * new_beta.transpose();
        let mut r = &m.s + resid.transpose() * &m.sxx * &resid;
        mirror_upper(&mut r);
        let mut oinv = omega_chol.inverse();
        mirror_upper(&mut oinv);
        let grad = (&oinv * (&omega - &r) * &oinv).diagonal();
        let info = oinv.component_mul(&oinv);
        let step = linalg::cholesky(&info, "information")?.solve(&grad);
        let f0 = concentrated_theta_objective(&omega, &r).unwrap_or(f64::INFINITY);
        let base = &new_beta * new_beta.transpose();
        let mut t = 1.0;
        let mut new_theta2 = theta2.clone();
        for _ in 0..40 {
            let cand = &theta2 - &step * t;
            if cand.iter().all(|&v| v > 0.0) {
                let om = &base + DMatrix::from_diagonal(&cand);
                if concentrated_theta_objective(&om, &r).is_some_and(|f| f <= f0) {
                    new_theta2 = cand;
                    break;
                }
            }
            t *= 0.5;
        }

        let change = (&new_alpha - &alpha)
            .amax()
            .max((&new_beta - &beta).amax())
            .max((new_theta2.map(f64::sqrt) - &theta).amax());
        sweeps.push(SweepInfo { pi2, kappa2, change });
        alpha = new_alpha;
        beta = new_beta;
        theta2 = new_theta2;
        if change < TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(MAX_SWEEPS));
    }
    let params = MimicParams {
        alpha,
        beta,
        theta_diag: theta2.map(f64::sqrt),
        phi: m.sxx,
        sigma2: 1.0,
    };
    Ok(ImplicitFit { params, sweeps, converged })
}
