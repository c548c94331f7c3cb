//! Time-series preprocessing for the dynamic estimators: integration-order
//! classification, differencing, cointegration residuals and the
//! error-correction design.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Dataset, IntegrationOrder, ModelSpec};

/// 5% critical value of the Dickey-Fuller t statistic with intercept.
pub const ADF_CRITICAL: f64 = -2.86;
pub const MIN_SERIES_LEN: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesOrder {
    pub label: String,
    pub order: IntegrationOrder,
    /// Median unit-root t statistic across series; absent when pinned.
    pub statistic: Option<f64>,
    pub threshold: f64,
    pub overridden: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesClassification {
    pub causes: Vec<SeriesOrder>,
}

impl SeriesClassification {
    pub fn order(&self, label: &str) -> Option<IntegrationOrder> {
        self.causes.iter().find(|c| c.label == label).map(|c| c.order)
    }

    /// Cause labels split into (I(1), I(0)), each in spec order.
    pub fn split(&self) -> (Vec<String>, Vec<String>) {
        let pick = |o| self.causes.iter().filter(|c| c.order == o).map(|c| c.label.clone()).collect();
        (pick(IntegrationOrder::I1), pick(IntegrationOrder::I0))
    }
}

/// Exact first differences.
pub fn difference(series: &DVector<f64>) -> DVector<f64> {
    if series.len() < 2 {
        return DVector::zeros(0);
    }
    DVector::from_fn(series.len() - 1, |i, _| series[i + 1] - series[i])
}

/// t statistic of ρ in Δx_t = c + ρx_{t−1} + γΔx_{t−1} + e_t.
pub fn adf_statistic(series: &[f64]) -> Option<f64> {
    let t = series.len();
    if t < 4 {
        return None;
    }
    let rows = t - 2;
    let mut x = DMatrix::zeros(rows, 3);
    let mut y = DMatrix::zeros(rows, 1);
    for r in 0..rows {
        let i = r + 2;
        y[(r, 0)] = series[i] - series[i - 1];
        x[(r, 0)] = 1.0;
        x[(r, 1)] = series[i - 1];
        x[(r, 2)] = series[i - 1] - series[i - 2];
    }
    let (q, rr) = linalg::thin_qr(&x).ok()?;
    let coef = rr.solve_upper_triangular(&q.tr_mul(&y))?;
    let resid = &y - &x * &coef;
    let dof = rows as f64 - 3.0;
    if dof <= 0.0 {
        return None;
    }
    let s2 = resid.norm_squared() / dof;
    let rinv = rr.try_inverse()?;
    let var_rho = s2 * rinv.row(1).norm_squared();
    if !(var_rho > 0.0) {
        return None;
    }
    Some(coef[(1, 0)] / var_rho.sqrt())
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn is_constant(s: &[f64]) -> bool {
    s.iter().all(|v| *v == s[0])
}

/// Classifies one column: each series segment gets a unit-root test and the
/// majority decision wins.
fn classify_column(label: &str, values: &DVector<f64>, ranges: &[Range<usize>]) -> Result<SeriesOrder> {
    let shortest = ranges.iter().map(|r| r.len()).min().unwrap_or(0);
    if shortest < MIN_SERIES_LEN {
        return Err(Error::SeriesTooShort { name: label.to_string(), len: shortest, min: MIN_SERIES_LEN });
    }
    let mut stats = Vec::with_capacity(ranges.len());
    let mut constant = 0;
    for r in ranges {
        let seg = &values.as_slice()[r.clone()];
        if is_constant(seg) {
            constant += 1;
            continue;
        }
        if let Some(t) = adf_statistic(seg) {
            stats.push(t);
        }
    }
    if stats.is_empty() {
        if constant > 0 {
            return Err(Error::ConstantSeries(label.to_string()));
        }
        return Err(Error::RankDeficient(format!("unit-root regression for `{label}` is singular")));
    }
    let rejections = stats.iter().filter(|&&t| t < ADF_CRITICAL).count();
    let order = if 2 * rejections > stats.len() { IntegrationOrder::I0 } else { IntegrationOrder::I1 };
    Ok(SeriesOrder {
        label: label.to_string(),
        order,
        statistic: Some(median(&mut stats)),
        threshold: ADF_CRITICAL,
        overridden: false,
    })
}

/// Integration order of every cause. Orders pinned in the spec win; the rest
/// are decided by a one-lag augmented Dickey-Fuller regression with
/// intercept at the 5% level, per series, by majority across panel units.
pub fn classify_integration(data: &Dataset, spec: &ModelSpec) -> Result<SeriesClassification> {
    let ranges = data.series_ranges();
    let mut causes = Vec::with_capacity(spec.causes.len());
    for label in &spec.causes {
        if let Some(&order) = spec.integration_order.get(label) {
            causes.push(SeriesOrder {
                label: label.clone(),
                order,
                statistic: None,
                threshold: ADF_CRITICAL,
                overridden: true,
            });
        } else {
            causes.push(classify_column(label, &data.column(label)?, &ranges)?);
        }
    }
    Ok(SeriesClassification { causes })
}

/// Levels OLS of each column of `y` on `x` with intercept (the first
/// Engle-Granger step). Returns Π, p×k.
pub fn long_run_coefficients(y: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() == 0 {
        return Ok(DMatrix::zeros(y.ncols(), 0));
    }
    let coef = linalg::least_squares(&linalg::with_intercept(x), y)?;
    Ok(coef.rows(1, x.ncols()).transpose())
}

/// z_t = y_t − Πx_t for every row.
pub fn cointegration_residual(y: &DMatrix<f64>, x: &DMatrix<f64>, pi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if y.nrows() != x.nrows() || pi.shape() != (y.ncols(), x.ncols()) {
        return Err(Error::DimensionMismatch(format!(
            "y is {:?}, x is {:?}, Pi is {:?}",
            y.shape(),
            x.shape(),
            pi.shape()
        )));
    }
    Ok(y - x * pi.transpose())
}

/// Row indices t ≥ 1 of every series segment, i.e. the rows that survive
/// differencing.
pub fn current_rows(ranges: &[Range<usize>]) -> Vec<usize> {
    ranges.iter().flat_map(|r| (r.start + 1)..r.end).collect()
}

/// Within-segment first differences of every column.
pub fn difference_within(m: &DMatrix<f64>, ranges: &[Range<usize>]) -> DMatrix<f64> {
    let rows = current_rows(ranges);
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)] - m[(rows[i] - 1, j)])
}

/// Rows t ≥ 1 of `m`, optionally lagged by one period.
pub fn align_rows(m: &DMatrix<f64>, ranges: &[Range<usize>], lagged: bool) -> DMatrix<f64> {
    let rows = current_rows(ranges);
    let shift = usize::from(lagged);
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i] - shift, j)])
}

fn check_segments(data: &Dataset, min: usize) -> Result<Vec<Range<usize>>> {
    let ranges = data.series_ranges();
    let shortest = ranges.iter().map(|r| r.len()).min().unwrap_or(0);
    if shortest < min {
        return Err(Error::SeriesTooShort { name: "series".into(), len: shortest, min });
    }
    Ok(ranges)
}

/// Regressor and regressand blocks of
/// Δy_t = AΔx_t + Tv_t + Kz_{t−1} + w_t, all aligned to the same rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EcmDesign {
    pub dx: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub z_lag: DMatrix<f64>,
    pub dy: DMatrix<f64>,
    pub i1_causes: Vec<String>,
    pub i0_causes: Vec<String>,
    pub indicators: Vec<String>,
    /// Long-run coefficients used for z, p×(q−r).
    pub pi: DMatrix<f64>,
    /// Unit id of each design row (0-based position of its series).
    pub row_units: Vec<usize>,
}

impl EcmDesign {
    pub fn nrows(&self) -> usize {
        self.dy.nrows()
    }

    /// (Δx, v, z₋₁, Δy) side by side, in Σ order.
    pub fn observed(&self) -> DMatrix<f64> {
        linalg::hstack(&[&self.dx, &self.v, &self.z_lag, &self.dy])
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = self.i1_causes.iter().map(|c| format!("d.{c}")).collect();
        out.extend(self.i0_causes.iter().cloned());
        out.extend(self.indicators.iter().map(|y| format!("ec.{y}")));
        out.extend(self.indicators.iter().map(|y| format!("d.{y}")));
        out
    }
}

pub fn build_ecm_design(data: &Dataset, spec: &ModelSpec, classification: &SeriesClassification) -> Result<EcmDesign> {
    let ranges = check_segments(data, 2)?;
    let (i1, i0) = classification.split();
    let y = data.select(&spec.indicators)?;
    let x1 = data.select(&i1)?;
    let x0 = data.select(&i0)?;
    let rows = current_rows(&ranges);
    let (q, p) = (spec.causes.len(), spec.indicators.len());
    if rows.len() < q + p + 3 {
        return Err(Error::SeriesTooShort { name: "error-correction design".into(), len: rows.len(), min: q + p + 3 });
    }
    let pi = long_run_coefficients(&y, &x1)?;
    let z = cointegration_residual(&y, &x1, &pi)?;
    let row_units = ranges
        .iter()
        .enumerate()
        .flat_map(|(u, r)| std::iter::repeat_n(u, r.len() - 1))
        .collect();
    Ok(EcmDesign {
        dx: difference_within(&x1, &ranges),
        v: align_rows(&x0, &ranges, false),
        z_lag: align_rows(&z, &ranges, true),
        dy: difference_within(&y, &ranges),
        i1_causes: i1,
        i0_causes: i0,
        indicators: spec.indicators.clone(),
        pi,
        row_units,
    })
}

/// First differences of every referenced column within each series; the
/// result feeds the static estimator unchanged.
pub fn dmimic_transform(data: &Dataset, spec: &ModelSpec) -> Result<Dataset> {
    let ranges = check_segments(data, 2)?;
    let cols = spec.referenced_columns();
    let m = data.select(&cols)?;
    let d = difference_within(&m, &ranges);
    match data.units() {
        Some(u) => {
            let units = current_rows(&ranges).into_iter().map(|r| u[r]).collect();
            Dataset::panel(cols, d, units)
        }
        None => Dataset::new(cols, d),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Estimator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn noise(seed: u64, n: usize) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
    }

    fn cumsum(v: &DVector<f64>) -> DVector<f64> {
        let mut acc = 0.0;
        v.map(|e| {
            acc += e;
            acc
        })
    }

    fn single(name: &str, v: DVector<f64>) -> Dataset {
        Dataset::new(vec![name.into()], DMatrix::from_column_slice(v.len(), 1, v.as_slice())).unwrap()
    }

    fn spec_for(cause: &str) -> ModelSpec {
        ModelSpec::new(["y1", "y2"], [cause], Estimator::Emimic)
    }

    #[test]
    fn random_walks_are_integrated() {
        let hits = (0..200)
            .filter(|&s| {
                let d = single("x", cumsum(&noise(s, 100)));
                classify_integration(&d, &spec_for("x")).unwrap().order("x") == Some(IntegrationOrder::I1)
            })
            .count();
        assert!(hits >= 180, "{hits}/200");
    }

    #[test]
    fn white_noise_is_stationary() {
        let hits = (0..200)
            .filter(|&s| {
                let d = single("x", noise(s + 1000, 100));
                classify_integration(&d, &spec_for("x")).unwrap().order("x") == Some(IntegrationOrder::I0)
            })
            .count();
        assert!(hits >= 180, "{hits}/200");
    }

    #[test]
    fn constant_and_short_series_are_rejected() {
        let d = single("x", DVector::from_element(50, 3.0));
        assert!(matches!(classify_integration(&d, &spec_for("x")), Err(Error::ConstantSeries(_))));
        let d = single("x", noise(1, 8));
        assert!(matches!(classify_integration(&d, &spec_for("x")), Err(Error::SeriesTooShort { .. })));
    }

    #[test]
    fn pinned_order_wins() {
        let d = single("x", noise(3, 100));
        let s = spec_for("x").with_integration("x", IntegrationOrder::I1);
        let c = classify_integration(&d, &s).unwrap();
        assert_eq!(c.order("x"), Some(IntegrationOrder::I1));
        assert!(c.causes[0].overridden);
    }

    #[test]
    fn difference_examples() {
        assert_eq!(difference(&DVector::from_element(5, 2.0)), DVector::zeros(4));
        let ramp = DVector::from_fn(6, |i, _| 1.5 * i as f64 + 2.0);
        assert_eq!(difference(&ramp), DVector::from_element(5, 1.5));
        // Integer-valued draws keep the round trip free of rounding.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e = DVector::from_fn(30, |_, _| rng.random_range(-1000i32..1000) as f64);
        let d = difference(&cumsum(&e));
        assert_eq!(d, e.rows(1, 29).into_owned());
    }

    #[test]
    fn exact_cointegration_leaves_zero_residual() {
        let x = DMatrix::from_fn(20, 2, |i, j| (i * (j + 1)) as f64 + ((i * 7) % 3) as f64);
        let pi = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 2.0, 0.3]);
        let y = &x * pi.transpose();
        assert_eq!(cointegration_residual(&y, &x, &pi).unwrap().amax(), 0.0);
        let bad = DMatrix::zeros(3, 2);
        assert!(matches!(cointegration_residual(&y, &x, &bad), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn scalar_long_run_slope() {
        let x = cumsum(&noise(5, 400));
        let e = noise(6, 400);
        let y = &x * 2.0 + &e;
        let xm = DMatrix::from_column_slice(400, 1, x.as_slice());
        let ym = DMatrix::from_column_slice(400, 1, y.as_slice());
        let pi = long_run_coefficients(&ym, &xm).unwrap();
        assert!((pi[(0, 0)] - 2.0).abs() < 0.02);
        let z = cointegration_residual(&ym, &xm, &pi).unwrap();
        let dz = z.column(0) - &e;
        // z differs from e by a constant plus a small slope error.
        assert!((dz.add_scalar(-dz.mean())).amax() < 0.5);
    }

    fn ecm_data(t: usize, units: usize) -> Dataset {
        let n = t * units;
        let x1 = cumsum(&noise(7, n));
        let x2 = noise(8, n);
        let y1 = &x1 + noise(9, n);
        let y2 = &x1 * 0.5 + noise(10, n);
        let ids = (0..n).map(|i| i / t).collect();
        Dataset::panel(
            ["x1", "x2", "y1", "y2"].map(String::from).to_vec(),
            DMatrix::from_columns(&[x1, x2, y1, y2]),
            ids,
        )
        .unwrap()
    }

    #[test]
    fn ecm_blocks_are_row_aligned() {
        let d = ecm_data(20, 3);
        let spec = ModelSpec::new(["y1", "y2"], ["x1", "x2"], Estimator::Emimic)
            .with_integration("x1", IntegrationOrder::I1)
            .with_integration("x2", IntegrationOrder::I0);
        let c = classify_integration(&d, &spec).unwrap();
        let e = build_ecm_design(&d, &spec, &c).unwrap();
        for m in [&e.dx, &e.v, &e.z_lag, &e.dy] {
            assert_eq!(m.nrows(), 3 * 19);
        }
        assert_eq!(e.dx.ncols(), 1);
        assert_eq!(e.v.ncols(), 1);
        assert_eq!(e.observed().ncols(), 1 + 1 + 2 + 2);
        assert_eq!(e.labels()[0], "d.x1");
        // First row of unit 1 uses that unit's own first observation.
        let vals = d.values();
        assert_eq!(e.dy[(19, 0)], vals[(21, 2)] - vals[(20, 2)]);
        assert_eq!(e.v[(19, 0)], vals[(21, 1)]);
    }

    #[test]
    fn all_stationary_causes_leave_no_difference_block() {
        let d = ecm_data(20, 2);
        let spec = ModelSpec::new(["y1", "y2"], ["x1", "x2"], Estimator::Emimic)
            .with_integration("x1", IntegrationOrder::I0)
            .with_integration("x2", IntegrationOrder::I0);
        let c = classify_integration(&d, &spec).unwrap();
        let e = build_ecm_design(&d, &spec, &c).unwrap();
        assert_eq!(e.dx.ncols(), 0);
        assert_eq!(e.v.ncols(), 2);
    }

    #[test]
    fn dmimic_differences_within_units() {
        let d = ecm_data(10, 2);
        let spec = ModelSpec::new(["y1", "y2"], ["x1", "x2"], Estimator::Dmimic);
        let dd = dmimic_transform(&d, &spec).unwrap();
        assert_eq!(dd.nrows(), 18);
        assert_eq!(dd.names(), &["y1", "y2", "x1", "x2"]);
        assert_eq!(dmimic_transform(&d, &spec).unwrap(), dd);
        let c = Dataset::new(
            vec!["y1".into(), "y2".into(), "x1".into()],
            DMatrix::from_element(5, 3, 4.0),
        )
        .unwrap();
        let s = ModelSpec::new(["y1", "y2"], ["x1"], Estimator::Dmimic);
        assert_eq!(dmimic_transform(&c, &s).unwrap().values().amax(), 0.0);
    }
}
