//! Sampled noise curves: the unit of CLI output and fitting input.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::FitError;

/// What the ordinate of a [`NoiseCurve`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    /// Normalized variance against mean photocount.
    Variance,
    /// Photocount autocorrelation against `t/t_c`.
    Autocorrelation,
}

/// Sampled `(n_b, delta_b^2)` or `(t/t_c, C_nn)` series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCurve {
    pub kind: CurveKind,
    pub abscissa: Vec<f64>,
    pub ordinate: Vec<f64>,
    /// Optional per-point standard deviations of the ordinate.
    pub sigma: Option<Vec<f64>>,
    /// Free-form snapshot of the model that produced the curve.
    pub meta: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    abscissa: f64,
    ordinate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
}

impl NoiseCurve {
    pub fn new(kind: CurveKind, abscissa: Vec<f64>, ordinate: Vec<f64>) -> Result<Self, FitError> {
        let c = Self {
            kind,
            abscissa,
            ordinate,
            sigma: None,
            meta: serde_json::Value::Null,
        };
        c.check()?;
        Ok(c)
    }

    pub fn with_sigma(mut self, sigma: Vec<f64>) -> Result<Self, FitError> {
        self.sigma = Some(sigma);
        self.check()?;
        Ok(self)
    }

    pub fn with_meta(mut self, meta: serde_json::Value) -> Self {
        self.meta = meta;
        self
    }

    pub fn len(&self) -> usize {
        self.abscissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissa.is_empty()
    }

    /// Strictly increasing abscissa, finite positive ordinate.
    pub fn check(&self) -> Result<(), FitError> {
        let bad = |m: String| Err(FitError::InvalidCurve(m));
        if self.abscissa.len() != self.ordinate.len() {
            return bad(format!(
                "{} abscissa values but {} ordinate values",
                self.abscissa.len(),
                self.ordinate.len()
            ));
        }
        if self.abscissa.is_empty() {
            return bad("empty curve".into());
        }
        if let Some(i) = self
            .abscissa
            .windows(2)
            .position(|w| !(w[1] > w[0]) || !w[1].is_finite())
        {
            return bad(format!("abscissa not strictly increasing at row {}", i + 1));
        }
        if let Some(i) = self
            .ordinate
            .iter()
            .position(|&v| !v.is_finite() || v <= 0.0)
        {
            return bad(format!("ordinate must be finite and positive (row {i})"));
        }
        if let Some(s) = &self.sigma {
            if s.len() != self.len() {
                return bad("sigma column length mismatch".into());
            }
            if s.iter().any(|&v| !v.is_finite() || v <= 0.0) {
                return bad("sigma must be finite and positive".into());
            }
        }
        Ok(())
    }

    /// Reads `abscissa,ordinate[,sigma]` CSV.
    pub fn read_csv<R: Read>(kind: CurveKind, reader: R) -> Result<Self, FitError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| FitError::InvalidCurve(e.to_string()))?
            .clone();
        let names: Vec<&str> = headers.iter().collect();
        if names.len() < 2 || names[0] != "abscissa" || names[1] != "ordinate" {
            return Err(FitError::InvalidCurve(format!(
                "expected header `abscissa,ordinate[,sigma]`, found `{}`",
                names.join(",")
            )));
        }
        if names.len() > 3 || (names.len() == 3 && names[2] != "sigma") {
            return Err(FitError::InvalidCurve(format!(
                "unexpected columns in header `{}`",
                names.join(",")
            )));
        }
        let (mut xs, mut ys, mut ss) = (Vec::new(), Vec::new(), Vec::new());
        for row in rdr.deserialize::<Row>() {
            let row = row.map_err(|e| FitError::InvalidCurve(e.to_string()))?;
            xs.push(row.abscissa);
            ys.push(row.ordinate);
            if let Some(s) = row.sigma {
                ss.push(s);
            }
        }
        let curve = Self::new(kind, xs, ys)?;
        if names.len() == 3 {
            curve.with_sigma(ss)
        } else {
            Ok(curve)
        }
    }

    pub fn read_csv_path(kind: CurveKind, path: &Path) -> Result<Self, FitError> {
        let f = std::fs::File::open(path)
            .map_err(|e| FitError::InvalidCurve(format!("{}: {e}", path.display())))?;
        Self::read_csv(kind, f)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        for i in 0..self.len() {
            w.serialize(Row {
                abscissa: self.abscissa[i],
                ordinate: self.ordinate[i],
                sigma: self.sigma.as_ref().map(|s| s[i]),
            })?;
        }
        w.flush()?;
        Ok(())
    }
}
