#![allow(dead_code)]

use mimic_iv::covstruct::EmimicParams;
use mimic_iv::model::{Dataset, MimicParams};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| normal(rng))
}

/// A'A + 0.5 I, exactly symmetric.
pub fn random_spd(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
    let m = &a * a.transpose() + DMatrix::identity(k, k) * 0.5;
    DMatrix::from_fn(k, k, |i, j| if i <= j { m[(i, j)] } else { m[(j, i)] })
}

fn vec(rng: &mut ChaCha8Rng, k: usize) -> DVector<f64> {
    DVector::from_fn(k, |_, _| rng.random_range(-1.5..1.5))
}

pub fn random_mimic(rng: &mut ChaCha8Rng) -> MimicParams {
    let q = rng.random_range(1..5);
    let p = rng.random_range(2..6);
    MimicParams {
        alpha: vec(rng, q),
        beta: vec(rng, p),
        theta_diag: DVector::from_fn(p, |_, _| rng.random_range(0.2..1.5)),
        phi: random_spd(rng, q),
        sigma2: rng.random_range(0.5..2.0),
    }
}

pub fn random_emimic(rng: &mut ChaCha8Rng) -> EmimicParams {
    let k = rng.random_range(0..4);
    let r = rng.random_range(0..3);
    let p = rng.random_range(2..5);
    let joint = random_spd(rng, k + r);
    let shock = random_spd(rng, k + r);
    EmimicParams {
        gamma_star: vec(rng, k),
        tau: vec(rng, r),
        lambda: vec(rng, p),
        psi: rng.random_range(0.2..2.0),
        theta_diag: DVector::from_fn(p, |_, _| rng.random_range(0.2..1.5)),
        phi1_star: joint.view((0, 0), (k, k)).into_owned(),
        phi2: joint.view((k, k), (r, r)).into_owned(),
        n_mat: joint.view((0, k), (k, r)).into_owned(),
        alpha_delta: vec(rng, k),
        beta_delta: vec(rng, r),
        kappa_star: vec(rng, p),
        phi3_star: shock.view((0, 0), (k, k)).into_owned(),
        m_star: shock.view((k, 0), (r, k)).into_owned(),
        omega_star: random_spd(rng, p),
    }
}

/// Direct block evaluation of the static MIMIC covariance over (x, y).
pub fn mimic_blocks(p: &MimicParams) -> DMatrix<f64> {
    let (q, m) = (p.alpha.len(), p.beta.len());
    let phi_a = &p.phi * &p.alpha;
    let rho2 = p.alpha.dot(&phi_a);
    let mut s = DMatrix::zeros(q + m, q + m);
    for i in 0..q {
        for j in 0..q {
            s[(i, j)] = p.phi[(i, j)];
        }
        for j in 0..m {
            s[(i, q + j)] = phi_a[i] * p.beta[j];
            s[(q + j, i)] = phi_a[i] * p.beta[j];
        }
    }
    for i in 0..m {
        for j in 0..m {
            s[(q + i, q + j)] = (p.sigma2 + rho2) * p.beta[i] * p.beta[j];
        }
        s[(q + i, q + i)] += p.theta_diag[i].powi(2);
    }
    s
}

pub fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Static MIMIC sample from the simulation fixture: α = (0.8, 0.6, 0.4),
/// β = (1, 0.8, 0.6), Θ = 0.5 I, unit cause and disturbance variances.
pub fn static_sample(n: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let alpha = [0.8, 0.6, 0.4];
    let beta = [1.0, 0.8, 0.6];
    let mut m = DMatrix::zeros(n, 6);
    for i in 0..n {
        let mut eta = normal(&mut r);
        for j in 0..3 {
            m[(i, 3 + j)] = normal(&mut r);
            eta += alpha[j] * m[(i, 3 + j)];
        }
        for j in 0..3 {
            m[(i, j)] = beta[j] * eta + 0.5 * normal(&mut r);
        }
    }
    Dataset::new(names(&["y1", "y2", "y3", "x1", "x2", "x3"]), m).unwrap()
}

pub fn cumsum(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}
