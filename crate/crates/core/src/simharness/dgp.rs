use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;

/// True parameters of the simulated panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpParams {
    /// Latent coefficients of the three causes.
    pub alpha: [f64; 3],
    /// Indicator loadings.
    pub beta: [f64; 3],
    /// Error-correction coefficients on z₋₁.
    pub kappa: [f64; 3],
    /// Indicator error SD.
    pub theta: f64,
    /// Loading of the shared shock on cause 1 and on every indicator error.
    pub endogeneity: f64,
    /// Loading of each instrument innovation on cause 1.
    pub instrument_strength: f64,
    /// SD of the log volatility of each unit.
    pub volatility: f64,
}

impl Default for DgpParams {
    fn default() -> Self {
        Self {
            alpha: [0.8, 0.6, 0.4],
            beta: [1.0, 0.8, 0.6],
            kappa: [-0.2, -0.1, -0.1],
            theta: 0.5,
            endogeneity: 0.5,
            instrument_strength: 0.6,
            volatility: 1.0,
        }
    }
}

impl DgpParams {
    /// Idiosyncratic part of cause 1 so its innovation has unit variance
    /// when the shared shock is on at the default loading.
    fn cause1_noise(&self) -> f64 {
        let used = 2.0 * self.instrument_strength.powi(2) + 0.25;
        (1.0 - used).max(0.03).sqrt()
    }
}

pub const CAUSES: [&str; 3] = ["x1", "x2", "x3"];
pub const INDICATORS: [&str; 3] = ["y1", "y2", "y3"];
pub const INSTRUMENTS: [&str; 2] = ["w1", "w2"];

fn column_names() -> Vec<String> {
    INDICATORS.iter().chain(&CAUSES).chain(&INSTRUMENTS).map(|s| s.to_string()).collect()
}

const BURN_IN: usize = 10;

/// Random stream for one unit of one replication.
pub fn unit_rng(seed: u64, replication: u64, unit: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replication << 24) | unit);
    rng
}

/// One unit's series over `t` periods, columns (y, x, w).
///
/// The first `n_i1` causes are random walks, the rest white noise. Cause 1
/// is driven by the two instrument innovations and by a shock that also
/// hits every indicator error. The latent variable follows
/// Δη = a'Δx_I1 + τ'v + κ'z₋₁ + ζ with z = y − βa'x_I1, and Δy = βΔη + ε.
fn simulate_unit(params: &DgpParams, n_i1: usize, t: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut z = || -> f64 { rng.sample(StandardNormal) };
    let h = (params.volatility * z()).exp();
    let total = t + BURN_IN;
    let (alpha, beta, kappa) = (params.alpha, params.beta, params.kappa);
    let mut x = [0.0; 3];
    let mut y = [0.0; 3];
    let mut w = [0.0; 2];
    let mut out = DMatrix::zeros(t, 8);
    for period in 0..total {
        let omega = [z() * h, z() * h];
        let shock = z() * h;
        let mut innov = [0.0; 3];
        innov[0] = params.instrument_strength * (omega[0] + omega[1])
            + params.cause1_noise() * z() * h
            + params.endogeneity * shock;
        innov[1] = z() * h;
        innov[2] = z() * h;
        let zlag: Vec<f64> = (0..3)
            .map(|j| y[j] - beta[j] * (0..n_i1).map(|c| alpha[c] * x[c]).sum::<f64>())
            .collect();
        let mut d_eta = z() * h;
        for c in 0..3 {
            d_eta += alpha[c] * innov[c];
            if c < n_i1 {
                x[c] += innov[c];
            } else {
                x[c] = innov[c];
            }
        }
        d_eta += (0..3).map(|j| kappa[j] * zlag[j]).sum::<f64>();
        for j in 0..3 {
            y[j] += beta[j] * d_eta + params.theta * z() * h + params.endogeneity * shock;
        }
        for k in 0..2 {
            w[k] = if n_i1 > 0 { w[k] + omega[k] } else { omega[k] };
        }
        if period >= BURN_IN {
            let r = period - BURN_IN;
            for j in 0..3 {
                out[(r, j)] = y[j];
                out[(r, 3 + j)] = x[j];
            }
            out[(r, 6)] = w[0];
            out[(r, 7)] = w[1];
        }
    }
    out
}

/// Panel of `units` units × `t` periods. Unit i depends only on
/// (seed, replication, i), so smaller panels are prefixes of larger ones.
pub fn simulate_panel(params: &DgpParams, n_i1: usize, t: usize, units: usize, seed: u64, replication: u64) -> Result<Dataset> {
    if n_i1 > 3 || t < 2 || units == 0 {
        return Err(Error::InvalidData(format!("cannot simulate {units} units × {t} periods with {n_i1} I(1) causes")));
    }
    let mut values = DMatrix::zeros(units * t, 8);
    let mut ids = Vec::with_capacity(units * t);
    for u in 0..units {
        let mut rng = unit_rng(seed, replication, u as u64);
        let block = simulate_unit(params, n_i1, t, &mut rng);
        values.view_mut((u * t, 0), (t, 8)).copy_from(&block);
        ids.extend(std::iter::repeat_n(u, t));
    }
    Dataset::panel(column_names(), values, ids)
}

/// Cross-sectional version of the same model: y = βη + ε, η = α'x + ζ,
/// with cause 1 endogenous through the shared shock.
pub fn simulate_static(params: &DgpParams, n: usize, seed: u64, replication: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidData("cannot simulate an empty sample".into()));
    }
    let mut rng = unit_rng(seed, replication, 0);
    let mut z = || -> f64 { rng.sample(StandardNormal) };
    let mut values = DMatrix::zeros(n, 8);
    for i in 0..n {
        let h = (params.volatility * z()).exp();
        let omega = [z() * h, z() * h];
        let shock = z() * h;
        let x = [
            params.instrument_strength * (omega[0] + omega[1]) + params.cause1_noise() * z() * h + params.endogeneity * shock,
            z() * h,
            z() * h,
        ];
        let eta = (0..3).map(|c| params.alpha[c] * x[c]).sum::<f64>() + z() * h;
        for j in 0..3 {
            values[(i, j)] = params.beta[j] * eta + params.theta * z() * h + params.endogeneity * shock;
            values[(i, 3 + j)] = x[j];
        }
        values[(i, 6)] = omega[0];
        values[(i, 7)] = omega[1];
    }
    Dataset::new(column_names(), values)
}

/// True coefficient of cause 1 with the first indicator's loading fixed at 1.
pub fn scaled_alpha1(params: &DgpParams) -> f64 {
    params.alpha[0] * params.beta[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emimic::classify_integration;
    use crate::model::{Estimator, IntegrationOrder, ModelSpec};

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    /// Correlation of cause 1 with y1 minus its systematic part under the
    /// true coefficients.
    fn endogeneity_corr(params: &DgpParams) -> f64 {
        let d = simulate_static(params, 5000, 11, 0).unwrap();
        let x = d.select(&CAUSES).unwrap();
        let y1 = d.column("y1").unwrap();
        let composite: Vec<f64> = (0..d.nrows())
            .map(|i| y1[i] - params.beta[0] * (0..3).map(|c| params.alpha[c] * x[(i, c)]).sum::<f64>())
            .collect();
        corr(x.column(0).as_slice(), &composite)
    }

    #[test]
    fn same_seed_gives_identical_panels() {
        let p = DgpParams::default();
        let a = simulate_panel(&p, 1, 20, 30, 5, 2).unwrap();
        let b = simulate_panel(&p, 1, 20, 30, 5, 2).unwrap();
        assert_eq!(a, b);
        let c = simulate_panel(&p, 1, 20, 30, 5, 3).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn smaller_panels_are_prefixes() {
        let p = DgpParams::default();
        let big = simulate_panel(&p, 2, 20, 40, 9, 0).unwrap();
        let small = simulate_panel(&p, 2, 20, 10, 9, 0).unwrap();
        assert_eq!(small.values(), &big.values().rows(0, 200).into_owned());
    }

    #[test]
    fn endogeneity_knob_controls_error_correlation() {
        // Unit volatility leaves the population correlation at zero but makes
        // the sample correlation heavy-tailed, so the moment check runs on
        // homoskedastic units.
        let calm = DgpParams { volatility: 0.0, ..DgpParams::default() };
        let off = DgpParams { endogeneity: 0.0, ..calm.clone() };
        assert!(endogeneity_corr(&off).abs() < 0.05);
        assert!(endogeneity_corr(&calm) > 0.1);
    }

    #[test]
    fn instruments_are_relevant_and_exogenous() {
        let p = DgpParams { volatility: 0.0, ..DgpParams::default() };
        let d = simulate_static(&p, 5000, 4, 0).unwrap();
        let x1 = d.column("x1").unwrap();
        let w1 = d.column("w1").unwrap();
        let y2 = d.column("y2").unwrap();
        assert!(corr(x1.as_slice(), w1.as_slice()) > 0.3);
        // Instruments reach y only through x1.
        let x = d.select(&CAUSES).unwrap();
        let resid: Vec<f64> =
            (0..d.nrows()).map(|i| y2[i] - p.beta[1] * (0..3).map(|c| p.alpha[c] * x[(i, c)]).sum::<f64>()).collect();
        assert!(corr(w1.as_slice(), &resid).abs() < 0.05);
    }

    #[test]
    fn scenario_one_has_one_integrated_cause() {
        let p = DgpParams::default();
        let spec = ModelSpec::new(INDICATORS, CAUSES, Estimator::Emimic);
        let seeds = 20;
        let hits = (0..seeds)
            .filter(|&s| {
                let d = simulate_panel(&p, 1, 20, 100, s, 0).unwrap();
                let c = classify_integration(&d, &spec).unwrap();
                c.causes.iter().filter(|o| o.order == IntegrationOrder::I1).count() == 1
                    && c.order("x1") == Some(IntegrationOrder::I1)
            })
            .count();
        assert!(10 * hits >= 9 * seeds as usize, "{hits}/{seeds}");
    }

    #[test]
    fn invalid_shapes_are_rejected() {
        let p = DgpParams::default();
        assert!(simulate_panel(&p, 4, 20, 10, 0, 0).is_err());
        assert!(simulate_panel(&p, 1, 1, 10, 0, 0).is_err());
        assert!(simulate_static(&p, 0, 0, 0).is_err());
    }
}
