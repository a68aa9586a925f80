use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::MonitoringSeries;
use crate::error::{Error, Result};

/// Default screening threshold on |P|.
pub const DEFAULT_CORRELATION_THRESHOLD: f64 = 0.8;

/// Pearson correlation coefficient.
///
/// Evaluated in centered form, which is algebraically the raw-sum expression
/// `(kΣmn − ΣmΣn) / √((kΣm² − (Σm)²)(kΣn² − (Σn)²))` without its cancellation
/// on offset data.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Schema(format!("series lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData("pearson needs at least two points".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    // relative guard: float noise around a constant still counts as constant
    let sum_sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    if saa <= 1e-24 * sum_sq(a) {
        return Err(Error::DegenerateVariance("first series is constant".into()));
    }
    if sbb <= 1e-24 * sum_sq(b) {
        return Err(Error::DegenerateVariance("second series is constant".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Symmetric, unit-diagonal matrix of pairwise coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub channels: Vec<String>,
    pub coefficients: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn compute(channels: Vec<String>, columns: &[Vec<f64>]) -> Result<Self> {
        let k = columns.len();
        let mut coefficients = vec![vec![0.0; k]; k];
        for i in 0..k {
            coefficients[i][i] = 1.0;
            for j in i + 1..k {
                let p = pearson(&columns[i], &columns[j]).map_err(|e| match e {
                    Error::DegenerateVariance(_) => Error::DegenerateVariance(format!(
                        "constant channel among `{}`/`{}`",
                        channels[i], channels[j]
                    )),
                    other => other,
                })?;
                coefficients[i][j] = p;
                coefficients[j][i] = p;
            }
        }
        Ok(Self { channels, coefficients })
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.channels.iter().position(|c| c == a)?;
        let j = self.channels.iter().position(|c| c == b)?;
        Some(self.coefficients[i][j])
    }

    /// Square labeled CSV, first row and first column carry channel ids.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("channel");
        for c in &self.channels {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (c, row) in self.channels.iter().zip(&self.coefficients) {
            out.push_str(c);
            for v in row {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
        out
    }
}

/// Columns restricted to rows where every channel is clean.
pub fn complete_rows(series: &MonitoringSeries, channels: &[usize]) -> Vec<Vec<f64>> {
    let mut cols = vec![Vec::new(); channels.len()];
    for frame in series.frames() {
        let row: Option<Vec<f64>> = channels.iter().map(|&c| frame.cells[c].clean_value()).collect();
        if let Some(row) = row {
            for (col, v) in cols.iter_mut().zip(row) {
                col.push(v);
            }
        }
    }
    cols
}

/// Correlation screening: walks channels in order and keeps a channel only if
/// its |P| with every already-kept channel is at most `threshold`.
pub fn correlation_screen(series: &MonitoringSeries, threshold: f64) -> Result<(Vec<String>, CorrelationMatrix)> {
    let k = series.channels().len();
    if k < 2 {
        return Err(Error::InsufficientData("correlation screening needs at least two channels".into()));
    }
    let all: Vec<usize> = (0..k).collect();
    let cols = complete_rows(series, &all);
    let matrix = CorrelationMatrix::compute(series.channels().to_vec(), &cols)?;
    let mut kept: Vec<usize> = Vec::new();
    for j in 0..k {
        if kept.iter().all(|&i| matrix.coefficients[i][j].abs() <= threshold) {
            kept.push(j);
        }
    }
    Ok((kept.into_iter().map(|i| series.channels()[i].clone()).collect(), matrix))
}
