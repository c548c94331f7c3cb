//! Model-implied covariance matrices for every MIMIC variant, and the
//! lowering of each variant onto the common Σ = B(ΛΦΛ' + Ψ²)B' + Θ² form.
//!
//! Variable order is always causes first, then indicators: (x, y) for the
//! static model, (x, v, y) for the static error-correction split and
//! (Δx, v, z₋₁, Δy) for the error-correction form.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, mirror_upper};
use crate::model::{JoreskogStructure, MimicParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedForm {
    /// p×q, y = Πx + v.
    pub pi: DMatrix<f64>,
    /// p×p, Cov(v) = σ²ββ' + Θ².
    pub omega: DMatrix<f64>,
}

/// Parameters of the error-correction MIMIC family.
///
/// The static split uses (γ*, τ, Φ₁*, N, Φ₂); the error-correction form uses
/// (α_Δ, β_Δ, κ*, Φ₃*, M*, Φ₂, Ω*). Both share λ, ψ and Θ.
#[derive(Debug, Clone, PartialEq)]
pub struct EmimicParams {
    /// Coefficients of the I(1) causes, length q−r.
    pub gamma_star: DVector<f64>,
    /// Coefficients of the I(0) causes, length r.
    pub tau: DVector<f64>,
    pub lambda: DVector<f64>,
    /// Structural disturbance variance.
    pub psi: f64,
    pub theta_diag: DVector<f64>,
    pub phi1_star: DMatrix<f64>,
    pub phi2: DMatrix<f64>,
    /// (q−r)×r, Cov(x, v).
    pub n_mat: DMatrix<f64>,
    pub alpha_delta: DVector<f64>,
    pub beta_delta: DVector<f64>,
    pub kappa_star: DVector<f64>,
    pub phi3_star: DMatrix<f64>,
    /// r×(q−r), Cov(v, Δx).
    pub m_star: DMatrix<f64>,
    pub omega_star: DMatrix<f64>,
}

impl EmimicParams {
    pub fn n_i1(&self) -> usize {
        self.gamma_star.len()
    }

    pub fn n_i0(&self) -> usize {
        self.tau.len()
    }

    pub fn n_indicators(&self) -> usize {
        self.lambda.len()
    }

    fn check(&self) -> Result<()> {
        let (k, r, p) = (self.n_i1(), self.n_i0(), self.n_indicators());
        let shape_ok = self.phi1_star.shape() == (k, k)
            && self.phi2.shape() == (r, r)
            && self.n_mat.shape() == (k, r)
            && self.alpha_delta.len() == k
            && self.beta_delta.len() == r
            && self.kappa_star.len() == p
            && self.phi3_star.shape() == (k, k)
            && self.m_star.shape() == (r, k)
            && self.omega_star.shape() == (p, p)
            && self.theta_diag.len() == p;
        if !shape_ok {
            return Err(Error::DimensionMismatch(format!(
                "error-correction blocks do not conform to {k} I(1), {r} I(0) causes and {p} indicators"
            )));
        }
        Ok(())
    }

    fn static_phi(&self) -> DMatrix<f64> {
        let (k, r) = (self.n_i1(), self.n_i0());
        let mut phi = DMatrix::zeros(k + r, k + r);
        phi.view_mut((0, 0), (k, k)).copy_from(&self.phi1_star);
        phi.view_mut((0, k), (k, r)).copy_from(&self.n_mat);
        phi.view_mut((k, 0), (r, k)).copy_from(&self.n_mat.transpose());
        phi.view_mut((k, k), (r, r)).copy_from(&self.phi2);
        phi
    }

    fn ecm_phi(&self) -> DMatrix<f64> {
        let (k, r, p) = (self.n_i1(), self.n_i0(), self.n_indicators());
        let mut phi = DMatrix::zeros(k + r + p, k + r + p);
        phi.view_mut((0, 0), (k, k)).copy_from(&self.phi3_star);
        phi.view_mut((0, k), (k, r)).copy_from(&self.m_star.transpose());
        phi.view_mut((k, 0), (r, k)).copy_from(&self.m_star);
        phi.view_mut((k, k), (r, r)).copy_from(&self.phi2);
        phi.view_mut((k + r, k + r), (p, p)).copy_from(&self.omega_star);
        phi
    }
}

fn require_psd(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.nrows() == 0 {
        return Ok(());
    }
    let eig = m.clone().symmetric_eigen();
    let scale = m.amax().max(1.0);
    if eig.eigenvalues.iter().any(|&l| l < -1e-12 * scale) {
        return Err(Error::NotPositiveDefinite(what));
    }
    Ok(())
}

fn diag_sq(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(&v.map(|t| t * t))
}

/// Σ over (x, y): [Φ, Φαβ'; βα'Φ, (σ²+ρ²)ββ' + Θ²].
pub fn mimic_sigma(params: &MimicParams) -> Result<DMatrix<f64>> {
    let (q, p) = (params.n_causes(), params.n_indicators());
    if params.phi.shape() != (q, q) || params.theta_diag.len() != p {
        return Err(Error::DimensionMismatch("MIMIC parameter blocks do not conform".into()));
    }
    linalg::cholesky(&params.phi, "Phi")?;
    let phi_alpha = &params.phi * &params.alpha;
    let rho2 = params.alpha.dot(&phi_alpha);
    let mut s = DMatrix::zeros(q + p, q + p);
    s.view_mut((0, 0), (q, q)).copy_from(&params.phi);
    s.view_mut((0, q), (q, p)).copy_from(&(&phi_alpha * params.beta.transpose()));
    let yy = &params.beta * params.beta.transpose() * (params.sigma2 + rho2) + diag_sq(&params.theta_diag);
    s.view_mut((q, q), (p, p)).copy_from(&yy);
    mirror_upper(&mut s);
    Ok(s)
}

/// Σ = B(ΛΦΛ' + Ψ²)B' + Θ².
pub fn joreskog_sigma(s: &JoreskogStructure) -> Result<DMatrix<f64>> {
    s.check_dims()?;
    let mut inner = &s.lambda * &s.phi * s.lambda.transpose();
    for i in 0..s.psi.len() {
        inner[(i, i)] += s.psi[i] * s.psi[i];
    }
    let mut sigma = &s.b * inner * s.b.transpose();
    for i in 0..s.theta.len() {
        sigma[(i, i)] += s.theta[i] * s.theta[i];
    }
    mirror_upper(&mut sigma);
    Ok(sigma)
}

/// Shared layout of every single-latent lowering: B = [I 0; 0 λ],
/// Λ = [I; c'], Ψ = diag(0, √ψ), Θ = diag(0, θ). Loadings, coefficients and
/// Θ are free; Φ is free where `phi_free` says so.
fn single_latent_structure(
    phi: DMatrix<f64>,
    phi_free: DMatrix<bool>,
    coefs: &DVector<f64>,
    loadings: &DVector<f64>,
    psi_var: f64,
    theta: &DVector<f64>,
) -> Result<JoreskogStructure> {
    let k = phi.nrows();
    let p = loadings.len();
    if coefs.len() != k || theta.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {k} exogenous variables, {} error SDs for {p} indicators",
            coefs.len(),
            theta.len()
        )));
    }
    let mut b = DMatrix::zeros(k + p, k + 1);
    let mut b_free = DMatrix::from_element(k + p, k + 1, false);
    for i in 0..k {
        b[(i, i)] = 1.0;
    }
    for j in 0..p {
        b[(k + j, k)] = loadings[j];
        b_free[(k + j, k)] = true;
    }
    let mut lambda = DMatrix::zeros(k + 1, k);
    let mut lambda_free = DMatrix::from_element(k + 1, k, false);
    for i in 0..k {
        lambda[(i, i)] = 1.0;
        lambda[(k, i)] = coefs[i];
        lambda_free[(k, i)] = true;
    }
    let mut psi = DVector::zeros(k + 1);
    psi[k] = psi_var.sqrt();
    let mut th = DVector::zeros(k + p);
    let mut theta_free = vec![false; k + p];
    for j in 0..p {
        th[k + j] = theta[j];
        theta_free[k + j] = true;
    }
    let s = JoreskogStructure {
        b,
        lambda,
        phi,
        psi,
        theta: th,
        b_free,
        lambda_free,
        phi_free,
        psi_free: vec![false; k + 1],
        theta_free,
    };
    s.check_dims()?;
    Ok(s)
}

fn lower_free(k: usize) -> DMatrix<bool> {
    DMatrix::from_fn(k, k, |i, j| i >= j)
}

/// Moves a single-latent structure to scaling-indicator identification: the
/// loading of indicator `scaling` becomes a fixed 1 and the latent
/// disturbance SD is freed. Parameters are rescaled so Σ is unchanged.
pub fn fix_scaling_loading(s: &mut JoreskogStructure, scaling: usize) -> Result<()> {
    let k = s.lambda.nrows() - 1;
    let p = s.n_observed() - k;
    if scaling >= p {
        return Err(Error::DimensionMismatch(format!("scaling indicator {scaling} out of range for {p} indicators")));
    }
    let b = s.b[(k + scaling, k)];
    if b == 0.0 {
        return Err(Error::InvalidData("scaling indicator has a zero loading".into()));
    }
    for j in 0..p {
        s.b[(k + j, k)] /= b;
    }
    for i in 0..k {
        s.lambda[(k, i)] *= b;
    }
    s.psi[k] *= b.abs();
    s.b_free[(k + scaling, k)] = false;
    s.psi_free[k] = true;
    Ok(())
}

/// Static MIMIC lowering with Φ free.
pub fn map_mimic(params: &MimicParams) -> Result<JoreskogStructure> {
    let q = params.n_causes();
    single_latent_structure(
        params.phi.clone(),
        lower_free(q),
        &params.alpha,
        &params.beta,
        params.sigma2,
        &params.theta_diag,
    )
}

/// 2SLS-MIMIC lowering: the instrumented cause covariance Φ* replaces Φ and
/// α* replaces α; Φ* is free.
pub fn map_tsls_mimic(params: &MimicParams, phi_star: &DMatrix<f64>) -> Result<JoreskogStructure> {
    let q = params.n_causes();
    if phi_star.shape() != (q, q) {
        return Err(Error::DimensionMismatch(format!("Phi* must be {q}x{q}")));
    }
    single_latent_structure(
        phi_star.clone(),
        lower_free(q),
        &params.alpha,
        &params.beta,
        params.sigma2,
        &params.theta_diag,
    )
}

/// Reads MIMIC parameters back from a structure built by [`map_mimic`].
pub fn mimic_from_structure(s: &JoreskogStructure) -> MimicParams {
    let q = s.phi.nrows();
    let p = s.n_observed() - q;
    MimicParams {
        alpha: s.lambda.row(q).transpose(),
        beta: s.b.view((q, q), (p, 1)).column(0).into_owned(),
        theta_diag: s.theta.rows(q, p).into_owned(),
        phi: s.phi.clone(),
        sigma2: s.psi[q] * s.psi[q],
    }
}

pub fn reduced_form(params: &MimicParams) -> ReducedForm {
    ReducedForm {
        pi: &params.beta * params.alpha.transpose(),
        omega: &params.beta * params.beta.transpose() * params.sigma2 + diag_sq(&params.theta_diag),
    }
}

/// Σ over (x, v, y) for the static I(1)/I(0) split:
/// the three-by-three block matrix with the structural disturbance ψλλ'
/// included in the indicator block.
pub fn emimic_sigma_static(params: &EmimicParams) -> Result<DMatrix<f64>> {
    params.check()?;
    let (k, r, p) = (params.n_i1(), params.n_i0(), params.n_indicators());
    require_psd(&params.phi1_star, "Phi1*")?;
    require_psd(&params.phi2, "Phi2")?;
    let (g, t, l) = (&params.gamma_star, &params.tau, &params.lambda);
    let (phi1, phi2, nm) = (&params.phi1_star, &params.phi2, &params.n_mat);
    let xy = (phi1 * g + nm * t) * l.transpose();
    let vy = (nm.transpose() * g + phi2 * t) * l.transpose();
    let scal = g.dot(&(phi1 * g)) + 2.0 * g.dot(&(nm * t)) + t.dot(&(phi2 * t)) + params.psi;
    let yy = l * l.transpose() * scal + diag_sq(&params.theta_diag);
    let mut s = DMatrix::zeros(k + r + p, k + r + p);
    s.view_mut((0, 0), (k, k)).copy_from(phi1);
    s.view_mut((0, k), (k, r)).copy_from(nm);
    s.view_mut((0, k + r), (k, p)).copy_from(&xy);
    s.view_mut((k, k), (r, r)).copy_from(phi2);
    s.view_mut((k, k + r), (r, p)).copy_from(&vy);
    s.view_mut((k + r, k + r), (p, p)).copy_from(&yy);
    mirror_upper(&mut s);
    Ok(s)
}

/// Σ over (Δx, v, z₋₁, Δy) for the error-correction form. The cointegration
/// residual block is uncorrelated with the short-run regressors, and the Δy
/// block carries both κ*'Ω*κ* (inside the λ quadratic) and ψλλ'.
pub fn emimic_sigma_ecm(params: &EmimicParams) -> Result<DMatrix<f64>> {
    params.check()?;
    let (k, r, p) = (params.n_i1(), params.n_i0(), params.n_indicators());
    require_psd(&params.phi3_star, "Phi3*")?;
    require_psd(&params.phi2, "Phi2")?;
    require_psd(&params.omega_star, "Omega*")?;
    let (a, b, kap, l) = (&params.alpha_delta, &params.beta_delta, &params.kappa_star, &params.lambda);
    let (phi3, phi2, ms, om) = (&params.phi3_star, &params.phi2, &params.m_star, &params.omega_star);
    let dx_dy = (phi3 * a + ms.transpose() * b) * l.transpose();
    let v_dy = (ms * a + phi2 * b) * l.transpose();
    let z_dy = om * kap * l.transpose();
    let scal = a.dot(&(phi3 * a)) + 2.0 * a.dot(&(ms.transpose() * b)) + b.dot(&(phi2 * b)) + kap.dot(&(om * kap));
    let dy = l * l.transpose() * scal + l * l.transpose() * params.psi + diag_sq(&params.theta_diag);
    let n = k + r + 2 * p;
    let (oz, oy) = (k + r, k + r + p);
    let mut s = DMatrix::zeros(n, n);
    s.view_mut((0, 0), (k, k)).copy_from(phi3);
    s.view_mut((0, k), (k, r)).copy_from(&ms.transpose());
    s.view_mut((0, oy), (k, p)).copy_from(&dx_dy);
    s.view_mut((k, k), (r, r)).copy_from(phi2);
    s.view_mut((k, oy), (r, p)).copy_from(&v_dy);
    s.view_mut((oz, oz), (p, p)).copy_from(om);
    s.view_mut((oz, oy), (p, p)).copy_from(&z_dy);
    s.view_mut((oy, oy), (p, p)).copy_from(&dy);
    mirror_upper(&mut s);
    Ok(s)
}

/// Static split lowering: Φ = [Φ₁* N; N' Φ₂] free, Λ = [I; (γ*', τ')].
pub fn map_emimic_static(params: &EmimicParams) -> Result<JoreskogStructure> {
    params.check()?;
    let q = params.n_i1() + params.n_i0();
    let coefs = DVector::from_iterator(q, params.gamma_star.iter().chain(params.tau.iter()).copied());
    single_latent_structure(
        params.static_phi(),
        lower_free(q),
        &coefs,
        &params.lambda,
        params.psi,
        &params.theta_diag,
    )
}

/// Error-correction lowering: Φ = [Φ₃* M*' 0; M* Φ₂ 0; 0 0 Ω*] with the
/// zero blocks fixed, Λ = [I; (α_Δ', β_Δ', κ*')].
pub fn map_emimic_ecm(params: &EmimicParams) -> Result<JoreskogStructure> {
    params.check()?;
    let (k, r, p) = (params.n_i1(), params.n_i0(), params.n_indicators());
    let q = k + r;
    let coefs = DVector::from_iterator(
        q + p,
        params.alpha_delta.iter().chain(params.beta_delta.iter()).chain(params.kappa_star.iter()).copied(),
    );
    let free = DMatrix::from_fn(q + p, q + p, |i, j| i >= j && ((i < q && j < q) || (i >= q && j >= q)));
    single_latent_structure(params.ecm_phi(), free, &coefs, &params.lambda, params.psi, &params.theta_diag)
}

/// Reads error-correction parameters back from a structure built by
/// [`map_emimic_ecm`]. Static-split fields are left empty-shaped zeros.
pub fn ecm_from_structure(s: &JoreskogStructure, n_i1: usize, n_i0: usize) -> EmimicParams {
    let (k, r) = (n_i1, n_i0);
    let q = k + r;
    let p = s.phi.nrows() - q;
    let coefs = s.lambda.row(q + p).transpose();
    EmimicParams {
        gamma_star: DVector::zeros(k),
        tau: DVector::zeros(r),
        lambda: s.b.view((q + p, q + p), (p, 1)).column(0).into_owned(),
        psi: s.psi[q + p] * s.psi[q + p],
        theta_diag: s.theta.rows(q + p, p).into_owned(),
        phi1_star: DMatrix::zeros(k, k),
        phi2: s.phi.view((k, k), (r, r)).into_owned(),
        n_mat: DMatrix::zeros(k, r),
        alpha_delta: coefs.rows(0, k).into_owned(),
        beta_delta: coefs.rows(k, r).into_owned(),
        kappa_star: coefs.rows(q, p).into_owned(),
        phi3_star: s.phi.view((0, 0), (k, k)).into_owned(),
        m_star: s.phi.view((k, 0), (r, k)).into_owned(),
        omega_star: s.phi.view((q, q), (p, p)).into_owned(),
    }
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;

    fn scalar_params(alpha: f64) -> MimicParams {
        MimicParams::new(
            DVector::from_element(1, alpha),
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 1.0),
            DMatrix::identity(1, 1),
        )
        .unwrap()
    }

    #[test]
    fn scalar_hand_evaluated_sigma() {
        // Φ=1, α=1, β=1, Θ=1 → ρ²=1 → [[1,1],[1,3]]
        let s = mimic_sigma(&scalar_params(1.0)).unwrap();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 3.0]));
    }

    #[test]
    fn zero_alpha_is_block_diagonal() {
        let mut p = random_mimic(3);
        p.alpha.fill(0.0);
        p.sigma2 = 1.0;
        let s = mimic_sigma(&p).unwrap();
        let q = p.n_causes();
        let m = p.n_indicators();
        assert_eq!(s.view((0, q), (q, m)).amax(), 0.0);
        let yy = &p.beta * p.beta.transpose() + DMatrix::from_diagonal(&p.theta_diag.map(|t| t * t));
        assert!(linalg::max_abs_diff(&s.view((q, q), (m, m)).into_owned(), &yy) < 1e-14);
        let j = map_mimic(&p).unwrap();
        assert_eq!(j.lambda.row(q).amax(), 0.0);
    }

    #[test]
    fn identity_and_theta_only_structures() {
        let s = JoreskogStructure::fixed(
            DMatrix::identity(3, 3),
            DMatrix::identity(3, 3),
            DMatrix::identity(3, 3),
            DVector::zeros(3),
            DVector::zeros(3),
        )
        .unwrap();
        assert_eq!(joreskog_sigma(&s).unwrap(), DMatrix::identity(3, 3));
        let theta = DVector::from_vec(vec![0.5, 2.0]);
        let s = JoreskogStructure::fixed(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            theta.clone(),
        )
        .unwrap();
        assert_eq!(joreskog_sigma(&s).unwrap(), DMatrix::from_diagonal(&theta.map(|t| t * t)));
    }

    #[test]
    fn mapping_has_documented_block_shapes() {
        let p = MimicParams::new(
            DVector::from_vec(vec![0.8, 0.6]),
            DVector::from_vec(vec![1.0, 0.8, 0.6]),
            DVector::from_element(3, 0.5),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let s = map_mimic(&p).unwrap();
        assert_eq!(s.b.shape(), (5, 3));
        assert_eq!(s.lambda.shape(), (3, 2));
        assert_eq!(s.b.view((0, 0), (2, 2)).into_owned(), DMatrix::identity(2, 2));
        assert_eq!(s.b.view((2, 2), (3, 1)).column(0).into_owned(), p.beta);
        assert_eq!(s.b.view((0, 2), (2, 1)).amax(), 0.0);
        assert_eq!(s.b.view((2, 0), (3, 2)).amax(), 0.0);
        assert_eq!(s.lambda.row(2).transpose(), p.alpha);
        assert_eq!(s.psi.as_slice(), &[0.0, 0.0, 1.0]);
        assert_eq!(s.theta.rows(0, 2).amax(), 0.0);
        // Φ free, Ψ fixed, β free.
        assert!(s.phi_free[(1, 0)] && s.phi_free[(1, 1)]);
        assert!(s.psi_free.iter().all(|f| !f));
        assert!((0..3).all(|j| s.b_free[(2 + j, 2)]));
        assert_eq!(mimic_from_structure(&s), p);
    }

    #[test]
    fn omega_for_unit_loadings() {
        let p = MimicParams::new(
            DVector::from_element(1, 0.3),
            DVector::from_vec(vec![1.0, 1.0]),
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let rf = reduced_form(&p);
        assert_eq!(rf.omega, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
    }

    #[test]
    fn unit_vector_beta_gives_single_nonzero_row() {
        let mut p = random_mimic(11);
        p.beta.fill(0.0);
        p.beta[0] = 1.0;
        let rf = reduced_form(&p);
        assert_eq!(rf.pi.row(0).transpose(), p.alpha);
        for i in 1..p.n_indicators() {
            assert_eq!(rf.pi.row(i).amax(), 0.0);
        }
    }

    #[test]
    fn pi_has_rank_one() {
        for seed in 0..50 {
            let p = random_mimic(seed);
            let sv = reduced_form(&p).pi.singular_values();
            let tol = 1e-12 * sv[0].max(1.0);
            assert!(sv.iter().skip(1).all(|&s| s < tol));
        }
    }

    #[test]
    fn indicator_block_minus_theta_is_rank_one() {
        for seed in 0..50 {
            let p = random_mimic(seed);
            let q = p.n_causes();
            let m = p.n_indicators();
            let s = mimic_sigma(&p).unwrap();
            let rest = s.view((q, q), (m, m)).into_owned() - DMatrix::from_diagonal(&p.theta_diag.map(|t| t * t));
            let sv = rest.singular_values();
            assert!(sv.iter().skip(1).all(|&x| x < 1e-12 * sv[0].max(1.0)));
            let expect = &p.beta * p.beta.transpose() * (p.sigma2 + p.rho2());
            assert!(linalg::max_abs_diff(&rest, &expect) < 1e-12);
        }
    }

    #[test]
    fn non_pd_phi_is_rejected() {
        let mut p = random_mimic(5);
        p.phi = -DMatrix::identity(p.n_causes(), p.n_causes());
        assert!(matches!(mimic_sigma(&p), Err(Error::NotPositiveDefinite("Phi"))));
    }

    #[test]
    fn degenerate_split_matches_static_mimic() {
        // No I(0) causes: the static split collapses to the plain MIMIC shape.
        let p = random_mimic(21);
        let e = EmimicParams {
            gamma_star: p.alpha.clone(),
            tau: DVector::zeros(0),
            lambda: p.beta.clone(),
            psi: p.sigma2,
            theta_diag: p.theta_diag.clone(),
            phi1_star: p.phi.clone(),
            phi2: DMatrix::zeros(0, 0),
            n_mat: DMatrix::zeros(p.n_causes(), 0),
            alpha_delta: DVector::zeros(p.n_causes()),
            beta_delta: DVector::zeros(0),
            kappa_star: DVector::zeros(p.n_indicators()),
            phi3_star: DMatrix::identity(p.n_causes(), p.n_causes()),
            m_star: DMatrix::zeros(0, p.n_causes()),
            omega_star: DMatrix::identity(p.n_indicators(), p.n_indicators()),
        };
        let a = emimic_sigma_static(&e).unwrap();
        let b = mimic_sigma(&p).unwrap();
        assert!(linalg::max_abs_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn zero_kappa_decouples_residual_block() {
        let mut e = random_emimic(4);
        e.kappa_star.fill(0.0);
        let s = emimic_sigma_ecm(&e).unwrap();
        let (q, p) = (e.n_i1() + e.n_i0(), e.n_indicators());
        let z = q;
        assert_eq!(s.view((z, 0), (p, q)).amax(), 0.0);
        assert_eq!(s.view((z, z + p), (p, p)).amax(), 0.0);
        assert_eq!(s.view((z, z), (p, p)).into_owned(), e.omega_star);
    }

    #[test]
    fn mismatched_blocks_are_rejected() {
        let mut e = random_emimic(8);
        e.kappa_star = DVector::zeros(e.n_indicators() + 1);
        assert!(matches!(emimic_sigma_ecm(&e), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn assemblies_are_exactly_symmetric() {
        for seed in 0..100 {
            let s = mimic_sigma(&random_mimic(seed)).unwrap();
            assert_eq!(s, s.transpose());
            let e = random_emimic(seed);
            let a = emimic_sigma_static(&e).unwrap();
            let b = emimic_sigma_ecm(&e).unwrap();
            assert_eq!(a, a.transpose());
            assert_eq!(b, b.transpose());
        }
    }
}
