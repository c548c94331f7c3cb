use nalgebra::{DMatrix, DVector};

use crate::covstruct::joreskog_sigma;
use crate::error::{Error, Result};
use crate::linalg::{self, mirror_upper};
use crate::model::{Cell, JoreskogStructure};

/// F = log|Σ| + tr(TΣ⁻¹).
pub fn discrepancy(sigma: &DMatrix<f64>, t: &DMatrix<f64>) -> Result<f64> {
    if sigma.shape() != t.shape() || !sigma.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "Sigma is {:?}, sample matrix is {:?}",
            sigma.shape(),
            t.shape()
        )));
    }
    let chol = linalg::cholesky(sigma, "Sigma")?;
    let trace = chol.solve(t).trace();
    Ok(linalg::log_det(&chol) + trace)
}

/// Discrepancy as a function of the free cells of a template.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    pub template: &'a JoreskogStructure,
    pub t: &'a DMatrix<f64>,
    cells: Vec<Cell>,
}

impl<'a> Objective<'a> {
    pub fn new(template: &'a JoreskogStructure, t: &'a DMatrix<f64>) -> Result<Self> {
        template.check_dims()?;
        if t.shape() != (template.n_observed(), template.n_observed()) {
            return Err(Error::DimensionMismatch(format!(
                "sample matrix is {:?}, template has {} observed variables",
                t.shape(),
                template.n_observed()
            )));
        }
        Ok(Self { template, t, cells: template.free_cells() })
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn value(&self, theta: &DVector<f64>) -> Result<f64> {
        let s = self.template.unpack(theta)?;
        discrepancy(&joreskog_sigma(&s)?, self.t)
    }

    pub fn value_grad(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let s = self.template.unpack(theta)?;
        value_grad_at(&s, &self.cells, self.t)
    }
}

/// Value and analytic gradient of F over `cells` at structure `s`.
pub fn value_grad_at(s: &JoreskogStructure, cells: &[Cell], t: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let sigma = joreskog_sigma(s)?;
    let chol = linalg::cholesky(&sigma, "Sigma")?;
    let mut inv = chol.inverse();
    mirror_upper(&mut inv);
    let inv_t = &inv * t;
    let value = linalg::log_det(&chol) + inv_t.trace();
    // W = Σ⁻¹ − Σ⁻¹TΣ⁻¹ so that dF = tr(W dΣ).
    let mut w = &inv - &inv_t * &inv;
    mirror_upper(&mut w);
    Ok((value, gradient_from_w(s, cells, &w)))
}

/// Chain rule from W = ∂F/∂Σ (symmetric) to the free cells. Used with the
/// model W and, in the sandwich, with moment perturbations of it.
pub(crate) fn gradient_from_w(s: &JoreskogStructure, cells: &[Cell], w: &DMatrix<f64>) -> DVector<f64> {
    let mut m = &s.lambda * &s.phi * s.lambda.transpose();
    for i in 0..s.psi.len() {
        m[(i, i)] += s.psi[i] * s.psi[i];
    }
    let wbm = w * &s.b * &m;
    let g = s.b.transpose() * w * &s.b;
    let g_lambda_phi = &g * &s.lambda * &s.phi;
    let lgl = s.lambda.transpose() * &g * &s.lambda;
    DVector::from_iterator(
        cells.len(),
        cells.iter().map(|&c| match c {
            Cell::B(i, j) => 2.0 * wbm[(i, j)],
            Cell::Lambda(i, j) => 2.0 * g_lambda_phi[(i, j)],
            Cell::Phi(i, j) if i == j => lgl[(i, i)],
            Cell::Phi(i, j) => 2.0 * lgl[(i, j)],
            Cell::Psi(i) => 2.0 * s.psi[i] * g[(i, i)],
            Cell::Theta(i) => 2.0 * s.theta[i] * w[(i, i)],
        }),
    )
}

/// ∂Σ/∂θᵢ for every free cell, read off the chain rule with unit W.
fn sigma_derivatives(s: &JoreskogStructure, cells: &[Cell]) -> Vec<DMatrix<f64>> {
    let p = s.n_observed();
    let mut out = vec![DMatrix::zeros(p, p); cells.len()];
    for a in 0..p {
        for b in 0..=a {
            let mut w = DMatrix::zeros(p, p);
            w[(a, b)] = 1.0;
            w[(b, a)] = 1.0;
            let scale = if a == b { 1.0 } else { 0.5 };
            let g = gradient_from_w(s, cells, &w);
            for (d, gi) in out.iter_mut().zip(g.iter()) {
                d[(a, b)] = gi * scale;
                d[(b, a)] = gi * scale;
            }
        }
    }
    out
}

/// Expected Hessian of F, tr(Σ⁻¹ ∂ᵢΣ Σ⁻¹ ∂ⱼΣ): the Fisher information up to
/// the factor N/2.
pub fn expected_hessian(s: &JoreskogStructure, cells: &[Cell]) -> Result<DMatrix<f64>> {
    let sigma = joreskog_sigma(s)?;
    let chol = linalg::cholesky(&sigma, "Sigma")?;
    let m: Vec<DMatrix<f64>> = sigma_derivatives(s, cells).iter().map(|d| chol.solve(d)).collect();
    let mt: Vec<DMatrix<f64>> = m.iter().map(|x| x.transpose()).collect();
    let k = cells.len();
    let mut h = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let v = mt[i].tr_dot(&m[j]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covstruct::{map_emimic_ecm, map_mimic, testing};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_discrepancy_is_dimension() {
        let i = DMatrix::identity(4, 4);
        assert!((discrepancy(&i, &i).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn scaled_sigma_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = testing::random_spd(&mut rng, 3);
        let log_t = linalg::log_det(&linalg::cholesky(&t, "T").unwrap());
        for c in [0.5, 1.0, 2.5] {
            let f = discrepancy(&(&t * c), &t).unwrap();
            let expect = 3.0 * f64::ln(c) + log_t + 3.0 / c;
            assert!((f - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn non_pd_sigma_is_reported() {
        let mut s = DMatrix::identity(2, 2);
        s[(1, 1)] = -1.0;
        assert!(matches!(discrepancy(&s, &DMatrix::identity(2, 2)), Err(Error::NotPositiveDefinite(_))));
    }

    fn check_gradient(s: &JoreskogStructure, t: &DMatrix<f64>) {
        let obj = Objective::new(s, t).unwrap();
        let theta = s.pack();
        let (_, g) = obj.value_grad(&theta).unwrap();
        for k in 0..theta.len() {
            let h = 1e-5 * (1.0 + theta[k].abs());
            let mut up = theta.clone();
            up[k] += h;
            let mut dn = theta.clone();
            dn[k] -= h;
            let fd = (obj.value(&up).unwrap() - obj.value(&dn).unwrap()) / (2.0 * h);
            let rel = (g[k] - fd).abs() / g[k].abs().max(fd.abs()).max(1e-3);
            assert!(rel < 1e-5, "cell {:?}: analytic {} fd {}", obj.cells()[k], g[k], fd);
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        for seed in 0..30 {
            let p = testing::random_mimic(seed);
            let s = map_mimic(&p).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let t = testing::random_spd(&mut rng, s.n_observed());
            check_gradient(&s, &t);
        }
        for seed in 0..10 {
            let e = testing::random_emimic(seed);
            let mut s = map_emimic_ecm(&e).unwrap();
            s.psi_free = s.psi.iter().map(|&v| v != 0.0).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 200);
            let t = testing::random_spd(&mut rng, s.n_observed());
            check_gradient(&s, &t);
        }
    }
}
