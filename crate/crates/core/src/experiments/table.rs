//! Long-format tables: one row per cell or aggregate, written as CSV.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{write_atomic, write_json};

/// A table of preformatted cells. Floats are written with their shortest
/// round-trip representation, so parsing a written table is lossless.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Lossless text form of a float.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Construction(format!("csv: {e}"));
        w.write_record(&self.columns).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Construction(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let csv_err = |e: csv::Error| Error::Format { path: PathBuf::from("<csv>"), msg: e.to_string() };
        let columns = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|x| x.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()
            .map_err(csv_err)?;
        Ok(Table { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Parses a numeric column.
    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column(name).ok_or_else(|| Error::invalid(format!("no column {name}")))?;
        self.rows
            .iter()
            .map(|r| {
                r[j].parse::<f64>().map_err(|_| Error::invalid(format!("column {name}: {:?} is not a number", r[j])))
            })
            .collect()
    }
}

/// Writes `<name>.csv` and `<name>.json` into `dir`, reads the CSV back and
/// checks it reproduces the table.
pub fn summarize(dir: &Path, name: &str, table: &Table, report: &impl Serialize) -> Result<Vec<PathBuf>> {
    let csv_path = dir.join(format!("{name}.csv"));
    let json_path = dir.join(format!("{name}.json"));
    let text = table.to_csv()?;
    write_atomic(&csv_path, text.as_bytes())?;
    let back = Table::from_csv(&std::fs::read_to_string(&csv_path)?)?;
    if &back != table {
        return Err(Error::Format { path: csv_path, msg: "CSV read-back differs from the table".into() });
    }
    write_json(&json_path, report)?;
    Ok(vec![csv_path, json_path])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(&["k", "m", "rate", "label"]);
        t.push(vec!["2".into(), "10".into(), fmt_f64(0.1 + 0.2), "a,b \"q\"".into()]);
        t.push(vec!["4".into(), "12".into(), fmt_f64(1e-300), String::new()]);
        t
    }

    #[test]
    fn csv_roundtrip() {
        let t = sample();
        assert_eq!(Table::from_csv(&t.to_csv().unwrap()).unwrap(), t);
        assert_eq!(t.column_f64("rate").unwrap(), vec![0.1 + 0.2, 1e-300]);
    }

    #[test]
    fn json_roundtrip() {
        let t = sample();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<Table>(&s).unwrap(), t);
    }

    #[test]
    fn summarize_writes_both() {
        let dir = tempfile::tempdir().unwrap();
        let t = sample();
        let paths = summarize(dir.path(), "grid", &t, &t).unwrap();
        assert!(paths.iter().all(|p| p.exists()));
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths[1]).unwrap()).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(Table::from_csv(&std::fs::read_to_string(&paths[0]).unwrap()).unwrap(), t);
    }
}
