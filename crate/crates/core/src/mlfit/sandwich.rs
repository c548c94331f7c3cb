use nalgebra::{DMatrix, DVector};

use super::objective::{gradient_from_w, value_grad_at};
use crate::covstruct::joreskog_sigma;
use crate::error::{Error, Result};
use crate::linalg::{self, mirror_upper};
use crate::model::JoreskogStructure;

/// Empirical moment blocks and Hessians entering the sandwich.
#[derive(Debug, Clone)]
pub struct MomentBlocks {
    /// Γ₀ over (means, vech T): [[T, third moments], [·, fourth − σσ']].
    pub gamma0: DMatrix<f64>,
    /// ∂²F/∂vech(T)∂θ', one row per distinct moment.
    pub h_eta_theta: DMatrix<f64>,
    pub h_theta_theta: DMatrix<f64>,
    pub n_means: usize,
}

impl MomentBlocks {
    pub fn third_moments(&self) -> DMatrix<f64> {
        let m = self.gamma0.nrows() - self.n_means;
        self.gamma0.view((0, self.n_means), (self.n_means, m)).into_owned()
    }

    pub fn fourth_moments(&self) -> DMatrix<f64> {
        let m = self.gamma0.nrows() - self.n_means;
        self.gamma0.view((self.n_means, self.n_means), (m, m)).into_owned()
    }
}

#[derive(Debug, Clone)]
pub struct Sandwich {
    /// Asymptotic covariance of √N(θ̂ − θ).
    pub pi: DMatrix<f64>,
    pub std_errors: DVector<f64>,
    pub blocks: MomentBlocks,
}

fn vech_pairs(p: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(p * (p + 1) / 2);
    for j in 0..p {
        for i in j..p {
            out.push((i, j));
        }
    }
    out
}

/// Γ₀ from empirical central moments of the rows of `data`.
pub fn moment_gamma(data: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = data.shape();
    let c = linalg::center_columns(data);
    let pairs = vech_pairs(p);
    let m = pairs.len();
    let nf = n as f64;
    // Products c_i c_j per row for each vech pair.
    let prod = DMatrix::from_fn(n, m, |r, k| c[(r, pairs[k].0)] * c[(r, pairs[k].1)]);
    let sigma = DVector::from_fn(m, |k, _| prod.column(k).sum() / nf);
    let mut g = DMatrix::zeros(p + m, p + m);
    let mut t = c.tr_mul(&c) / nf;
    mirror_upper(&mut t);
    g.view_mut((0, 0), (p, p)).copy_from(&t);
    let third = c.tr_mul(&prod) / nf;
    g.view_mut((0, p), (p, m)).copy_from(&third);
    g.view_mut((p, 0), (m, p)).copy_from(&third.transpose());
    let mut fourth = prod.tr_mul(&prod) / nf - &sigma * sigma.transpose();
    mirror_upper(&mut fourth);
    g.view_mut((p, p), (m, m)).copy_from(&fourth);
    g
}

/// Hessian of F over the free cells by central differences of the analytic
/// gradient, step 1e-4·(1 + |θᵢ|), symmetrized.
pub fn numerical_hessian(s: &JoreskogStructure, t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cells = s.free_cells();
    let theta = s.pack();
    let k = theta.len();
    let mut h = DMatrix::zeros(k, k);
    for j in 0..k {
        let step = 1e-4 * (1.0 + theta[j].abs());
        let mut up = theta.clone();
        up[j] += step;
        let mut dn = theta.clone();
        dn[j] -= step;
        let (_, gu) = value_grad_at(&s.unpack(&up)?, &cells, t)?;
        let (_, gd) = value_grad_at(&s.unpack(&dn)?, &cells, t)?;
        h.set_column(j, &((gu - gd) / (2.0 * step)));
    }
    let ht = h.transpose();
    Ok((h + ht) * 0.5)
}

/// Robust covariance H⁻¹ A'Γ₀A H⁻¹ of the estimate `fitted`, where `data`
/// holds the observed variables (rows = observations) in Σ order.
pub fn sandwich_covariance(fitted: &JoreskogStructure, data: &DMatrix<f64>) -> Result<Sandwich> {
    let (n, p) = data.shape();
    if p != fitted.n_observed() {
        return Err(Error::DimensionMismatch(format!(
            "data has {p} columns, structure has {} observed variables",
            fitted.n_observed()
        )));
    }
    let cells = fitted.free_cells();
    let k = cells.len();
    if n <= k {
        return Err(Error::RankDeficient(format!("{n} observations for {k} free parameters")));
    }
    let (_, t) = linalg::covariance(data);
    let h = numerical_hessian(fitted, &t)?;
    let h_chol = nalgebra::Cholesky::new(h.clone()).ok_or(Error::SingularHessian)?;

    // The gradient is linear in T through W = Σ⁻¹ − Σ⁻¹TΣ⁻¹, so each moment
    // column is exact: ∂W/∂T_ij = −Σ⁻¹(E_ij + E_ji)Σ⁻¹ (one term on the diagonal).
    let sigma = joreskog_sigma(fitted)?;
    let inv = linalg::spd_inverse(&sigma, "Sigma")?;
    let pairs = vech_pairs(p);
    let mut a = DMatrix::zeros(pairs.len(), k);
    for (r, &(i, j)) in pairs.iter().enumerate() {
        let mut dw = -(inv.column(i) * inv.row(j));
        if i != j {
            dw -= inv.column(j) * inv.row(i);
        }
        mirror_upper(&mut dw);
        a.set_row(r, &gradient_from_w(fitted, &cells, &dw).transpose());
    }

    let gamma0 = moment_gamma(data);
    let g_oo = gamma0.view((p, p), (pairs.len(), pairs.len()));
    let hinv_at = h_chol.solve(&a.transpose());
    let mut pi = &hinv_at * g_oo * hinv_at.transpose();
    let pit = pi.transpose();
    pi = (pi + pit) * 0.5;
    let std_errors = pi.diagonal().map(|v| (v.max(0.0) / n as f64).sqrt());
    Ok(Sandwich {
        pi,
        std_errors,
        blocks: MomentBlocks { gamma0, h_eta_theta: a, h_theta_theta: h, n_means: p },
    })
}
