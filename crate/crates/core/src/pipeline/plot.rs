use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::io::write_atomic;
use super::run::correlation_of;
use crate::data::ingest_csv_auto;
use crate::error::{Error, Result};
use crate::metrics::{EvalReport, EvalRow};
use crate::wavelet::{decompose, Boundary, Wavelet, WaveletDecomposition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    /// Labeled channel × channel Pearson matrix of a monitoring CSV.
    CorrelationHeatmap,
    /// Wavelet bands of one channel of a monitoring CSV.
    Decomposition,
    /// timestamp, truth, prediction of one predictions file.
    ForecastOverlay,
    /// station, truth, prediction of one predictions file or a directory of them.
    Scatter,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] =
        [PlotKind::CorrelationHeatmap, PlotKind::Decomposition, PlotKind::ForecastOverlay, PlotKind::Scatter];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::CorrelationHeatmap => "correlation-heatmap",
            PlotKind::Decomposition => "decomposition",
            PlotKind::ForecastOverlay => "forecast-overlay",
            PlotKind::Scatter => "scatter",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown plot kind `{s}`")))
    }
}

/// Settings used by the decomposition kind only.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    /// Channel to decompose; the first channel when `None`.
    pub channel: Option<String>,
    pub wavelet: Wavelet,
    pub level: usize,
    pub boundary: Boundary,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self { channel: None, wavelet: Wavelet::Db4, level: 4, boundary: Boundary::Symmetric }
    }
}

/// Columns oL_n, oH_n, …, oH_1, shorter bands padded with empty cells.
pub fn decomposition_csv(d: &WaveletDecomposition) -> String {
    let mut header = vec![format!("oL_{}", d.level)];
    let mut bands: Vec<&[f64]> = vec![&d.approximation];
    for (k, band) in d.details.iter().enumerate().rev() {
        header.push(format!("oH_{}", k + 1));
        bands.push(band);
    }
    let rows = bands.iter().map(|b| b.len()).max().unwrap_or(0);
    let mut out = header.join(",");
    out.push('\n');
    for r in 0..rows {
        let line: Vec<String> = bands.iter().map(|b| b.get(r).map(|v| format!("{v:?}")).unwrap_or_default()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Deserialize)]
struct PredictionRow {
    station: String,
    timestamp: i64,
    truth: f64,
    prediction: f64,
}

fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|_| Error::NotFound(path.to_path_buf()))?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<PredictionRow>, _>>()?)
}

fn prediction_files(artifact: &Path) -> Result<Vec<PathBuf>> {
    if !artifact.is_dir() {
        return Ok(vec![artifact.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(artifact)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::NotFound(artifact.join("*.csv")));
    }
    Ok(files)
}

/// Scores predictions files (`station,timestamp,truth,prediction`), one row
/// per station in file order. `artifact` is a file or a directory of them.
pub fn evaluate_predictions(artifact: &Path, model: &str) -> Result<EvalReport> {
    if !artifact.exists() {
        return Err(Error::NotFound(artifact.to_path_buf()));
    }
    let mut rows: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for file in prediction_files(artifact)? {
        for r in read_predictions(&file)? {
            match rows.iter_mut().find(|row| row.0 == r.station) {
                Some(row) => {
                    row.1.push(r.truth);
                    row.2.push(r.prediction);
                }
                None => rows.push((r.station, vec![r.truth], vec![r.prediction])),
            }
        }
    }
    Ok(EvalReport { rows: rows.iter().map(|(st, y, p)| EvalRow::score(st, model, y, p, 0.0)).collect() })
}

/// Plot data for `artifact` as CSV text.
pub fn plot_data(artifact: &Path, kind: PlotKind, opts: &PlotOptions) -> Result<String> {
    if !artifact.exists() {
        return Err(Error::NotFound(artifact.to_path_buf()));
    }
    match kind {
        PlotKind::CorrelationHeatmap => Ok(correlation_of(&ingest_csv_auto(artifact)?)?.to_csv()),
        PlotKind::Decomposition => {
            let series = ingest_csv_auto(artifact)?;
            let ch = match &opts.channel {
                Some(c) => series.channel_index(c)?,
                None => 0,
            };
            let values: Vec<f64> = series
                .column(ch)
                .iter()
                .map(|c| c.value())
                .collect::<Option<_>>()
                .ok_or_else(|| Error::InsufficientData("decomposition needs a gap-free channel".into()))?;
            Ok(decomposition_csv(&decompose(&values, opts.wavelet, opts.level, opts.boundary)?))
        }
        PlotKind::ForecastOverlay => {
            let mut out = String::from("timestamp,truth,prediction\n");
            for r in read_predictions(artifact)? {
                out.push_str(&format!("{},{:?},{:?}\n", r.timestamp, r.truth, r.prediction));
            }
            Ok(out)
        }
        PlotKind::Scatter => {
            let mut out = String::from("station,truth,prediction\n");
            for file in prediction_files(artifact)? {
                for r in read_predictions(&file)? {
                    out.push_str(&format!("{},{:?},{:?}\n", r.station, r.truth, r.prediction));
                }
            }
            Ok(out)
        }
    }
}

/// Writes [`plot_data`] to `out`.
pub fn emit_plot_data(artifact: &Path, kind: PlotKind, opts: &PlotOptions, out: &Path) -> Result<()> {
    let text = plot_data(artifact, kind, opts)?;
    write_atomic(out, text.as_bytes())
}
