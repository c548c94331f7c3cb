//! Synthetic survey data for the `score` demo: retirees' job quality in
//! their last job, with income, tenure, contract type and pension ratio as
//! causes and four ordinal satisfaction items as indicators.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const FIXTURE_SEED: u64 = 4_021;
pub const FIXTURE_ROWS: usize = 1_200;

pub const GROUPS: [&str; 9] = ["AT", "BE", "CZ", "DE", "DK", "ES", "FR", "IT", "SE"];

pub const HEADER: [&str; 13] = [
    "country",
    "income_decile",
    "tenure",
    "permanent",
    "pension_ratio",
    "education",
    "age",
    "female",
    "hours",
    "satisfaction",
    "recognition",
    "security",
    "freedom",
];

/// Model config matching the fixture columns.
pub const MODEL: &str = "\
# Job quality of retirees' last job.
[indicators]
satisfaction
recognition
security
freedom

[causes]
income_decile
tenure
permanent
pension_ratio

[instruments]
education
hours

[options]
estimator = TSLS_MIMIC
scaling_indicator = satisfaction
endogenous = income_decile
";

fn ordinal(v: f64) -> u8 {
    match v {
        v if v < -0.8 => 1,
        v if v < 0.0 => 2,
        v if v < 0.8 => 3,
        _ => 4,
    }
}

/// CSV text of `rows` synthetic respondents. Income shares an unobserved
/// component with job quality, so it is endogenous; education and hours
/// move income only.
pub fn job_quality_csv(rows: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = HEADER.join(",");
    out.push('\n');
    let loadings = [1.0, 0.8, 0.7, 0.6];
    for _ in 0..rows {
        let mut n = || -> f64 { rng.sample(StandardNormal) };
        let (a, b, c, d, e, f, g) = (n(), n(), n(), n(), n(), n(), n());
        let (h, k, u) = (n(), n(), n());
        let noise = [n(), n(), n(), n()];
        let gi = rng.random_range(0..GROUPS.len());
        let effect = -0.6 + 1.2 * gi as f64 / (GROUPS.len() - 1) as f64;
        let education = (12.0 + 3.0 * a).round().clamp(0.0, 22.0);
        let age = rng.random_range(50..=70);
        let female = u8::from(rng.random_bool(0.5));
        let hours = (38.0 + 6.0 * b).round().clamp(10.0, 70.0);
        let propensity = 0.5 * (education - 12.0) / 3.0 + 0.3 * (hours - 38.0) / 6.0 + 0.3 * effect + 0.8 * c + 0.6 * u;
        let income = (5.5 + 2.0 * propensity).round().clamp(1.0, 10.0);
        let tenure = (2.3 + 0.6 * d).exp().round().clamp(0.0, 45.0);
        let permanent = u8::from(e > -0.5 - 0.3 * effect);
        let pension = (0.6 + 0.1 * f).clamp(0.2, 1.0);
        let eta = 0.25 * (income - 5.5) / 2.0
            + 0.15 * (tenure.ln_1p() - 2.3) / 0.6
            + 0.4 * f64::from(permanent)
            + 0.3 * (pension - 0.6) / 0.1
            + effect
            + 0.6 * g
            + 0.5 * u
            - 0.3;
        let items: Vec<u8> = loadings.iter().zip(noise).map(|(l, e)| ordinal(l * eta + 0.6 * e)).collect();
        let pension_cell = if h < -2.05 { String::new() } else { format!("{pension:.3}") };
        let satisfaction_cell = if k > 2.33 { String::new() } else { items[0].to_string() };
        let _ = writeln!(
            out,
            "{},{income},{tenure},{permanent},{pension_cell},{education},{age},{female},{hours},{satisfaction_cell},{},{},{}",
            GROUPS[gi], items[1], items[2], items[3]
        );
    }
    out
}
