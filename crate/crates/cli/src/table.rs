//! Tabular output: one header row of quantity symbols, finite values only.

use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    #[serde(skip)]
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = Vec<f64>>) {
        for r in rows {
            self.push(r);
        }
    }

    pub fn check_finite(&self) -> Result<(), CliError> {
        for row in &self.rows {
            if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                return Err(CliError::NonFinite {
                    table: self.name.clone(),
                    column: self.columns[i].clone(),
                });
            }
        }
        Ok(())
    }

    pub fn file_name(&self, format: Format) -> String {
        format!("{}.{}", self.name, format.extension())
    }

    /// Writes the table into `dir`; returns the file name.
    pub fn write(&self, dir: &Path, format: Format) -> Result<String, CliError> {
        self.check_finite()?;
        let file = self.file_name(format);
        let path = dir.join(&file);
        let bytes = match format {
            Format::Csv => self.to_csv()?,
            Format::Json => {
                let mut s = serde_json::to_vec_pretty(self).map_err(|e| CliError::io(&file, e))?;
                s.push(b'\n');
                s
            }
        };
        std::fs::write(&path, bytes).map_err(|e| CliError::io(path.display().to_string(), e))?;
        Ok(file)
    }

    fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let err = |e: csv::Error| CliError::io(&self.name, e);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| number(*v))).map_err(err)?;
        }
        w.into_inner().map_err(|e| CliError::io(&self.name, e))
    }
}

/// Shortest round-trip decimal; scientific notation outside `[1e-4, 1e15)`.
pub fn number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.0, 1.0, -2.5, 1e-300, 3.0e20, 0.1 + 0.2, 123456.789] {
            assert_eq!(number(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(number(1e-5), "1e-5");
        assert_eq!(number(10.0), "10");
    }

    #[test]
    fn non_finite_cells_are_rejected() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![1.0, f64::NAN]);
        assert!(matches!(t.check_finite(), Err(CliError::NonFinite { column, .. }) if column == "b"));
    }

    #[test]
    fn csv_has_one_header_row() {
        let mut t = Table::new("t", &["x", "Vb"]);
        t.push(vec![0.5, 1e-6]);
        let s = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(s, "x,Vb\n0.5,1e-6\n");
    }
}
