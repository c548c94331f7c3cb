use std::collections::HashSet;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::select_columns;

/// Column-named numeric observations.
///
/// Rows are observations. Panel data additionally carry a unit id per row;
/// rows of one unit must be contiguous and in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    values: DMatrix<f64>,
    units: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        Self::build(names, values, None)
    }

    pub fn panel(names: Vec<String>, values: DMatrix<f64>, units: Vec<usize>) -> Result<Self> {
        Self::build(names, values, Some(units))
    }

    fn build(names: Vec<String>, values: DMatrix<f64>, units: Option<Vec<usize>>) -> Result<Self> {
        if names.len() != values.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        if values.nrows() < 2 {
            return Err(Error::InvalidData(format!("need at least 2 rows, got {}", values.nrows())));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::InvalidData(format!("duplicate column name `{n}`")));
            }
        }
        if let Some((idx, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (r, c) = (idx % values.nrows(), idx / values.nrows());
            return Err(Error::InvalidData(format!(
                "non-finite value at row {r}, column `{}`",
                names[c]
            )));
        }
        if let Some(u) = &units {
            if u.len() != values.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "{} unit ids for {} rows",
                    u.len(),
                    values.nrows()
                )));
            }
            let mut finished = HashSet::new();
            for w in u.windows(2) {
                if w[0] != w[1] && !finished.insert(w[0]) {
                    return Err(Error::InvalidData(format!("rows of unit {} are not contiguous", w[0])));
                }
            }
            if finished.contains(u.last().unwrap()) {
                return Err(Error::InvalidData("unit rows are not contiguous".into()));
            }
        }
        Ok(Self { names, values, units })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn units(&self) -> Option<&[usize]> {
        self.units.as_deref()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<DVector<f64>> {
        let j = self.column_index(name).ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        Ok(self.values.column(j).into_owned())
    }

    /// Columns by name, in the requested order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<DMatrix<f64>> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n.as_ref())
                    .ok_or_else(|| Error::UnknownColumn(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(select_columns(&self.values, &idx))
    }

    /// Row ranges of each unit; a cross-section is one range per row.
    pub fn unit_ranges(&self) -> Vec<Range<usize>> {
        match &self.units {
            None => (0..self.nrows()).map(|i| i..i + 1).collect(),
            Some(u) => {
                let mut out = Vec::new();
                let mut start = 0;
                for i in 1..=u.len() {
                    if i == u.len() || u[i] != u[start] {
                        out.push(start..i);
                        start = i;
                    }
                }
                out
            }
        }
    }

    /// Contiguous time-series segments: each unit of a panel, or the whole
    /// dataset when no unit ids are present.
    pub fn series_ranges(&self) -> Vec<Range<usize>> {
        match &self.units {
            None => vec![0..self.nrows()],
            Some(_) => self.unit_ranges(),
        }
    }

    /// Copy with one column's values replaced.
    pub fn with_column(&self, name: &str, col: &DVector<f64>) -> Result<Self> {
        let j = self.column_index(name).ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        if col.len() != self.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "replacement for `{name}` has {} rows, dataset has {}",
                col.len(),
                self.nrows()
            )));
        }
        let mut values = self.values.clone();
        values.set_column(j, col);
        Self::build(self.names.clone(), values, self.units.clone())
    }

    /// Copy with an extra column appended.
    pub fn with_appended(&self, name: &str, col: &DVector<f64>) -> Result<Self> {
        let mut names = self.names.clone();
        names.push(name.to_string());
        let values = self.values.clone().insert_column(self.ncols(), 0.0);
        let mut values = values;
        values.set_column(self.ncols(), col);
        Self::build(names, values, self.units.clone())
    }

    /// Rows `rows` in order. Unit ids, when present, are relabelled
    /// sequentially by `unit_labels` so resampled duplicates stay distinct.
    pub fn take_rows(&self, rows: &[usize], unit_labels: Option<Vec<usize>>) -> Result<Self> {
        let values = DMatrix::from_fn(rows.len(), self.ncols(), |i, j| self.values[(rows[i], j)]);
        let units = match (unit_labels, &self.units) {
            (Some(l), _) => Some(l),
            (None, Some(u)) => Some(rows.iter().map(|&r| u[r]).collect()),
            (None, None) => None,
        };
        Self::build(self.names.clone(), values, units)
    }

    /// Draw whole units with replacement.
    pub fn resample_units(&self, picks: &[usize]) -> Result<Self> {
        let ranges = self.unit_ranges();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (new_id, &u) in picks.iter().enumerate() {
            for r in ranges[u].clone() {
                rows.push(r);
                labels.push(new_id);
            }
        }
        let labels = self.units.as_ref().map(|_| labels);
        self.take_rows(&rows, labels)
    }
}
