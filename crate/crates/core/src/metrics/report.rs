use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{mape, r2, rmse};
use crate::error::Result;

/// Scores of one model on one station. A metric that could not be computed is
/// `None`, with the reason in `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub station: String,
    pub model: String,
    pub rmse: Option<f64>,
    pub mape: Option<f64>,
    pub r2: Option<f64>,
    pub runtime_seconds: f64,
    pub n: usize,
    pub error: Option<String>,
}

impl EvalRow {
    pub fn score(station: &str, model: &str, truth: &[f64], pred: &[f64], runtime_seconds: f64) -> Self {
        let mut errors = Vec::new();
        let mut keep = |r: Result<f64>| match r {
            Ok(v) => Some(v),
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        };
        let rmse = keep(rmse(truth, pred));
        let mape = keep(mape(truth, pred));
        let r2 = keep(r2(truth, pred));
        Self {
            station: station.to_string(),
            model: model.to_string(),
            rmse,
            mape,
            r2,
            runtime_seconds,
            n: truth.len(),
            error: (!errors.is_empty()).then(|| errors.join("; ")),
        }
    }

    pub fn failed(station: &str, model: &str, error: String, runtime_seconds: f64) -> Self {
        Self {
            station: station.to_string(),
            model: model.to_string(),
            rmse: None,
            mape: None,
            r2: None,
            runtime_seconds,
            n: 0,
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn get(&self, station: &str, model: &str) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.station == station && r.model == model)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        if self.rows.is_empty() {
            w.write_record(["station", "model", "rmse", "mape", "r2", "runtime_seconds", "n", "error"])?;
        }
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r.deserialize().collect::<std::result::Result<Vec<EvalRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per (station, model), in report order.
    pub fn to_markdown(&self) -> String {
        let cell = |v: Option<f64>, digits: usize| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.digits$}"));
        let mut out = String::from("| Station | Model | RMSE | MAPE (%) | R² | Runtime (s) | n |\n");
        out.push_str("|---|---|---:|---:|---:|---:|---:|\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {:.2} | {} |",
                r.station,
                r.model,
                cell(r.rmse, 4),
                cell(r.mape, 3),
                cell(r.r2, 4),
                r.runtime_seconds,
                r.n
            );
        }
        out
    }
}
