//! Numerical inversion: rebuild missing or abnormal target values from
//! predictor channels with a random forest.

use serde::{Deserialize, Serialize};

use super::correlation::{correlation_screen, CorrelationMatrix};
use super::forest::{rf_fit, ForestParams, RandomForest};
use super::sobol::{sobol_indices, SobolResult};
use crate::data::{Cell, MonitoringSeries};
use crate::error::{Error, Result};

/// Minimum number of clean rows needed to fit the forest.
pub const MIN_FIT_ROWS: usize = 50;

pub const DEFAULT_PREDICTORS: [&str; 2] = ["rainfall", "water_level"];

struct Design {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    gaps: Vec<usize>,
}

fn design(series: &MonitoringSeries, target: &str, predictors: &[&str]) -> Result<Design> {
    let t = series.channel_index(target)?;
    let p = predictors
        .iter()
        .map(|c| series.channel_index(c))
        .collect::<Result<Vec<_>>>()?;
    if p.is_empty() {
        return Err(Error::Config("at least one predictor channel is required".into()));
    }
    if p.contains(&t) {
        return Err(Error::Config(format!("target `{target}` cannot also be a predictor")));
    }
    let mut d = Design {
        x: Vec::new(),
        y: Vec::new(),
        gaps: Vec::new(),
    };
    for (row, frame) in series.frames().iter().enumerate() {
        let features: Option<Vec<f64>> = p.iter().map(|&c| frame.cells[c].clean_value()).collect();
        match frame.cells[t].clean_value() {
            Some(y) => {
                if let Some(x) = features {
                    d.x.push(x);
                    d.y.push(y);
                }
            }
            None => d.gaps.push(row),
        }
    }
    Ok(d)
}

/// Fits the target-from-predictors forest on clean rows only.
pub fn fit_inversion(
    series: &MonitoringSeries,
    target: &str,
    predictors: &[&str],
    params: &ForestParams,
) -> Result<RandomForest> {
    let d = design(series, target, predictors)?;
    if d.y.len() < MIN_FIT_ROWS {
        return Err(Error::InsufficientData(format!(
            "{} clean rows for `{target}`, need {MIN_FIT_ROWS}",
            d.y.len()
        )));
    }
    rf_fit(&d.x, &d.y, params)
}

/// Replaces missing and abnormal target cells with forest predictions flagged
/// `imputed`. Cells flagged observed are never touched.
pub fn ni_impute(
    series: &MonitoringSeries,
    target: &str,
    predictors: &[&str],
    params: &ForestParams,
) -> Result<MonitoringSeries> {
    let d = design(series, target, predictors)?;
    if d.gaps.is_empty() {
        return Ok(series.clone());
    }
    let p: Vec<usize> = predictors.iter().map(|c| series.channel_index(c)).collect::<Result<_>>()?;
    let unimputable: Vec<usize> = d
        .gaps
        .iter()
        .copied()
        .filter(|&row| p.iter().any(|&c| series.frames()[row].cells[c].clean_value().is_none()))
        .collect();
    if !unimputable.is_empty() {
        return Err(Error::UnimputableRows { rows: unimputable });
    }
    if d.y.len() < MIN_FIT_ROWS {
        return Err(Error::InsufficientData(format!(
            "{} clean rows for `{target}`, need {MIN_FIT_ROWS}",
            d.y.len()
        )));
    }
    let forest = rf_fit(&d.x, &d.y, params)?;
    let t = series.channel_index(target)?;
    let mut column = series.column(t);
    for &row in &d.gaps {
        let x: Vec<f64> = p
            .iter()
            .map(|&c| series.frames()[row].cells[c].clean_value().unwrap())
            .collect();
        column[row] = Cell::Imputed(forest.predict(&x)?);
    }
    series.with_column(t, &column)
}

/// Diagnostics behind predictor selection: correlation heat map, forest
/// importances and Sobol indices of the fitted forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionAnalysis {
    pub target: String,
    pub candidates: Vec<String>,
    pub retained: Vec<String>,
    pub correlation: CorrelationMatrix,
    pub importances: Vec<f64>,
    pub sobol: SobolResult,
}

/// Screens `candidates` for collinearity, fits a forest of the target on the
/// retained ones, and measures importances and Sobol indices over the observed
/// per-feature ranges.
pub fn analyze_inversion(
    series: &MonitoringSeries,
    target: &str,
    candidates: &[&str],
    threshold: f64,
    params: &ForestParams,
    sobol_samples: usize,
) -> Result<InversionAnalysis> {
    let sub = series.select(candidates)?;
    let (retained, correlation) = correlation_screen(&sub, threshold)?;
    let retained_refs: Vec<&str> = retained.iter().map(String::as_str).collect();
    let d = design(series, target, &retained_refs)?;
    if d.y.len() < MIN_FIT_ROWS {
        return Err(Error::InsufficientData(format!(
            "{} clean rows for `{target}`, need {MIN_FIT_ROWS}",
            d.y.len()
        )));
    }
    let forest = rf_fit(&d.x, &d.y, params)?;
    let bounds: Vec<(f64, f64)> = (0..retained.len())
        .map(|j| {
            d.x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[j]), hi.max(r[j])))
        })
        .collect();
    let sobol = sobol_indices(&forest, &bounds, sobol_samples, params.seed)?;
    Ok(InversionAnalysis {
        target: target.to_string(),
        candidates: candidates.iter().map(|s| s.to_string()).collect(),
        retained,
        correlation,
        importances: forest.importances,
        sobol,
    })
}
