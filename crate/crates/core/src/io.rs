//! File formats: numeric CSV in and out, and the JSON documents written for
//! single-component fits.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{DipcaError, Result};
use crate::solver::{Algorithm, Diagnostic, SolveReport};

/// Serde adapter storing an `Array1<f64>` as a plain JSON array.
pub mod array1 {
    use ndarray::Array1;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Array1<f64>, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Array1<f64>, D::Error> {
        Vec::<f64>::deserialize(de).map(Array1::from)
    }
}

/// Reads a numeric CSV: one row per time sample, one column per feature.
/// With `has_header` the first non-empty line is skipped. Errors carry the
/// 1-based line number.
pub fn read_csv_matrix<R: BufRead>(reader: R, has_header: bool) -> Result<Array2<f64>> {
    let mut values = Vec::new();
    let mut ncols: Option<usize> = None;
    let mut nrows = 0;
    let mut header_pending = has_header;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| DipcaError::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let mut count = 0;
        for field in trimmed.split(',') {
            let field = field.trim();
            let v: f64 = field.parse().map_err(|_| DipcaError::Parse {
                line: lineno,
                msg: format!("cannot parse '{field}' as a number"),
            })?;
            if !v.is_finite() {
                return Err(DipcaError::Parse {
                    line: lineno,
                    msg: format!("non-finite value '{field}'"),
                });
            }
            values.push(v);
            count += 1;
        }
        match ncols {
            None => ncols = Some(count),
            Some(c) if c != count => {
                return Err(DipcaError::Parse {
                    line: lineno,
                    msg: format!("expected {c} fields, found {count}"),
                })
            }
            _ => {}
        }
        nrows += 1;
    }
    let ncols = ncols.ok_or(DipcaError::Parse {
        line: 0,
        msg: "no data rows".into(),
    })?;
    Array2::from_shape_vec((nrows, ncols), values).map_err(|e| DipcaError::Parse {
        line: 0,
        msg: e.to_string(),
    })
}

/// Writes a matrix as CSV with an optional header line. Values use the
/// shortest representation that round-trips exactly.
pub fn write_csv_matrix<W: Write>(
    mut out: W,
    header: Option<&[String]>,
    mat: ArrayView2<f64>,
) -> Result<()> {
    if let Some(h) = header {
        writeln!(out, "{}", h.join(","))?;
    }
    let mut line = String::new();
    for row in mat.rows() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// JSON document for a single-component fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitModel {
    pub algorithm: Algorithm,
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub w: Vec<f64>,
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub residual_inf: f64,
    pub converged: bool,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub lambda_history: Vec<f64>,
    /// Whether the data were mean-centered before fitting.
    #[serde(default)]
    pub centered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<Diagnostic>,
}

impl FitModel {
    /// Final iterate when converged, otherwise the lowest-residual iterate.
    pub fn from_report(report: &SolveReport, n: usize, centered: bool) -> Self {
        let st = if report.converged {
            &report.state
        } else {
            &report.best_state
        };
        Self {
            algorithm: report.algorithm,
            m: st.w.len(),
            n,
            s: st.beta.len(),
            w: st.w.to_vec(),
            beta: st.beta.to_vec(),
            lambda: st.lambda,
            residual_inf: st.residual_inf,
            converged: report.converged,
            iterations: report.iterations(),
            wall_time_s: report.wall_time,
            lambda_history: report.lambda_history.clone(),
            centered,
            diagnostic: report.diagnostic.clone(),
        }
    }

    pub fn w(&self) -> Array1<f64> {
        Array1::from(self.w.clone())
    }

    pub fn beta(&self) -> Array1<f64> {
        Array1::from(self.beta.clone())
    }
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}
