use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{fit_prepared, pinned_spec, prepare};
use crate::mlfit::MinimizeOptions;
use crate::model::{Dataset, ModelSpec};

pub const MIN_RESAMPLES: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSe {
    pub std_errors: DVector<f64>,
    pub labels: Vec<String>,
    pub converged: usize,
    pub total: usize,
}

/// Nonparametric bootstrap: whole units are drawn with replacement, the
/// model is refit on each resample, and the SE of each parameter is the
/// standard deviation of its estimates over the converged refits.
pub fn bootstrap_se(
    data: &Dataset,
    spec: &ModelSpec,
    resamples: usize,
    seed: u64,
    opts: &MinimizeOptions,
) -> Result<BootstrapSe> {
    if resamples < MIN_RESAMPLES {
        return Err(Error::InvalidData(format!("bootstrap needs at least {MIN_RESAMPLES} resamples, got {resamples}")));
    }
    let units = data.unit_ranges().len();
    if units < 2 {
        return Err(Error::InvalidData("bootstrap needs at least two units to resample".into()));
    }
    let prep = prepare(data, spec)?;
    let base = fit_prepared(&prep, spec.estimator, opts)?;
    let spec = pinned_spec(spec, &prep);
    let k = base.estimates.len();
    let draws: Vec<Option<DVector<f64>>> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let picks: Vec<usize> = (0..units).map(|_| rng.random_range(0..units)).collect();
            let sample = data.resample_units(&picks).ok()?;
            let p = prepare(&sample, &spec).ok()?;
            let r = fit_prepared(&p, spec.estimator, opts).ok()?;
            (r.converged && r.estimates.len() == k).then_some(r.estimates)
        })
        .collect();
    let ok: Vec<&DVector<f64>> = draws.iter().flatten().collect();
    if 2 * ok.len() < resamples || ok.len() < 2 {
        return Err(Error::TooFewConverged { converged: ok.len(), total: resamples });
    }
    let m = ok.len() as f64;
    let mean = ok.iter().fold(DVector::zeros(k), |acc, e| acc + *e) / m;
    let var = ok.iter().fold(DVector::zeros(k), |acc, e| acc + (*e - &mean).map(|d| d * d)) / (m - 1.0);
    Ok(BootstrapSe { std_errors: var.map(f64::sqrt), labels: base.labels, converged: ok.len(), total: resamples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{fit, FitOptions, SeRequest};
    use crate::model::Estimator;
    use crate::simharness::{simulate_static, DgpParams, CAUSES, INDICATORS};

    fn toy(n: usize) -> (Dataset, ModelSpec) {
        let p = DgpParams { endogeneity: 0.0, volatility: 0.0, ..DgpParams::default() };
        let d = simulate_static(&p, n, 21, 0).unwrap();
        (d, ModelSpec::new(INDICATORS, [CAUSES[0]], Estimator::Mimic))
    }

    #[test]
    fn too_few_resamples_are_rejected() {
        let (d, s) = toy(200);
        for b in [1, 49] {
            assert!(matches!(bootstrap_se(&d, &s, b, 1, &MinimizeOptions::default()), Err(Error::InvalidData(_))));
        }
    }

    #[test]
    fn same_seed_same_errors() {
        let (d, s) = toy(200);
        let a = bootstrap_se(&d, &s, 50, 7, &MinimizeOptions::default()).unwrap();
        let b = bootstrap_se(&d, &s, 50, 7, &MinimizeOptions::default()).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_se(&d, &s, 50, 8, &MinimizeOptions::default()).unwrap();
        assert_ne!(a.std_errors, c.std_errors);
    }

    #[test]
    fn agrees_with_sandwich_on_scalar_model() {
        let (d, s) = toy(2000);
        let opts = |se| FitOptions { std_errors: se, resamples: 200, seed: 3, ..FitOptions::default() };
        let sw = fit(&d, &s, &opts(SeRequest::Sandwich)).unwrap();
        let bs = fit(&d, &s, &opts(SeRequest::Bootstrap)).unwrap();
        let (a, b) = (sw.std_errors.unwrap(), bs.std_errors.unwrap());
        let j = sw.labels.iter().position(|l| l.starts_with("coef")).unwrap();
        let ratio = b[j] / a[j];
        assert!((ratio - 1.0).abs() < 0.2, "bootstrap {} vs sandwich {}", b[j], a[j]);
    }
}
