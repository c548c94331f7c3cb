use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::Dataset;

/// Rows read from a CSV file after complete-case filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCsv {
    pub data: Dataset,
    /// Text columns requested by name, aligned with the rows of `data`.
    pub text: BTreeMap<String, Vec<String>>,
    pub rows_read: usize,
    pub rows_dropped: usize,
}

/// Reads `path`, keeping `numeric` columns (all columns when empty) and the
/// `text` columns verbatim. Rows with an empty cell in any kept column are
/// dropped. With `unit` set, that numeric column becomes the panel id.
pub fn load_csv(path: &Path, numeric: &[String], text: &[String], unit: Option<&str>) -> Result<LoadedCsv> {
    let file = std::fs::File::open(path)?;
    parse_csv(file, numeric, text, unit)
}

fn malformed(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(std::io::Error::other(e.to_string())),
        _ => Error::MalformedCsv(e.to_string()),
    }
}

pub fn parse_csv<R: std::io::Read>(reader: R, numeric: &[String], text: &[String], unit: Option<&str>) -> Result<LoadedCsv> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(malformed)?.iter().map(str::to_string).collect();
    if header.iter().any(String::is_empty) {
        return Err(Error::MalformedCsv("empty column name in header".into()));
    }
    for (i, h) in header.iter().enumerate() {
        if header[..i].contains(h) {
            return Err(Error::MalformedCsv(format!("duplicate column `{h}` in header")));
        }
    }
    let find = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| Error::UnknownColumn(name.to_string()));
    let mut numeric: Vec<String> = if numeric.is_empty() {
        header.iter().filter(|h| !text.contains(h) && Some(h.as_str()) != unit).cloned().collect()
    } else {
        numeric.to_vec()
    };
    let mut seen = std::collections::HashSet::new();
    numeric.retain(|n| seen.insert(n.clone()));
    let num_idx = numeric.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;
    let text_idx = text.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;
    let unit_idx = unit.map(find).transpose()?;

    let mut values = Vec::new();
    let mut texts: Vec<Vec<String>> = vec![Vec::new(); text.len()];
    let mut units = Vec::new();
    let (mut read, mut dropped) = (0, 0);
    for rec in rdr.records() {
        let rec = rec.map_err(malformed)?;
        read += 1;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(read + 1);
        let cell = |j: usize| rec.get(j).unwrap_or("");
        let mut all = num_idx.iter().chain(&text_idx).chain(unit_idx.iter());
        if all.any(|&j| cell(j).is_empty()) {
            dropped += 1;
            continue;
        }
        for (k, &j) in num_idx.iter().enumerate() {
            let v: f64 = cell(j).parse().map_err(|_| Error::NonNumericCell {
                row: line,
                column: numeric[k].clone(),
                value: cell(j).to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumericCell { row: line, column: numeric[k].clone(), value: cell(j).to_string() });
            }
            values.push(v);
        }
        for (k, &j) in text_idx.iter().enumerate() {
            texts[k].push(cell(j).to_string());
        }
        if let Some(j) = unit_idx {
            let id: usize = cell(j).parse().map_err(|_| Error::NonNumericCell {
                row: line,
                column: header[j].clone(),
                value: cell(j).to_string(),
            })?;
            units.push(id);
        }
    }
    let kept = read - dropped;
    if kept == 0 {
        return Err(Error::EmptyAfterFiltering);
    }
    if dropped > 0 {
        log::info!("dropped {dropped} of {read} rows with missing values");
    }
    let matrix = DMatrix::from_row_slice(kept, numeric.len(), &values);
    let data = if unit_idx.is_some() { Dataset::panel(numeric, matrix, units)? } else { Dataset::new(numeric, matrix)? };
    Ok(LoadedCsv { data, text: text.iter().cloned().zip(texts).collect(), rows_read: read, rows_dropped: dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn load(text: &str, cols: &[&str]) -> Result<LoadedCsv> {
        parse_csv(text.as_bytes(), &names(cols), &[], None)
    }

    #[test]
    fn well_formed_file() {
        let l = load("a,b\n1,2\n3,4.5\n-1e-3,0\n", &[]).unwrap();
        assert_eq!(l.data.nrows(), 3);
        assert_eq!(l.data.names(), &["a", "b"]);
        assert_eq!(l.data.values()[(1, 1)], 4.5);
        assert_eq!(l.rows_dropped, 0);
    }

    #[test]
    fn missing_cell_drops_row() {
        let l = load("a,b\n1,2\n3,\n5,6\n", &["a", "b"]).unwrap();
        assert_eq!((l.data.nrows(), l.rows_dropped, l.rows_read), (2, 1, 3));
        // Missing values outside the referenced columns do not matter.
        let l = load("a,b\n1,2\n3,\n5,6\n", &["a"]).unwrap();
        assert_eq!(l.data.nrows(), 3);
    }

    #[test]
    fn text_cell_is_located() {
        match load("a,b\n1,2\n3,abc\n", &[]) {
            Err(Error::NonNumericCell { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (3, "b", "abc"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(load("a,b\n1,2,3\n", &[]), Err(Error::MalformedCsv(_))));
        assert!(matches!(load("a,a\n1,2\n", &[]), Err(Error::MalformedCsv(_))));
        assert!(matches!(load("a,b\n1,2\n", &["c"]), Err(Error::UnknownColumn(_))));
        assert!(matches!(load("a,b\n,2\n1,\n", &[]), Err(Error::EmptyAfterFiltering)));
    }

    #[test]
    fn text_and_unit_columns() {
        let csv = "id,g,x,y\n0,A,1,2\n0,A,2,3\n1,B,3,1\n1,B,5,2\n";
        let l = parse_csv(csv.as_bytes(), &[], &names(&["g"]), Some("id")).unwrap();
        assert_eq!(l.data.names(), &["x", "y"]);
        assert_eq!(l.text["g"], names(&["A", "A", "B", "B"]));
        assert_eq!(l.data.unit_ranges().len(), 2);
    }
}
