use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{EvalReport, EvalRow};
use crate::data::ForecastDataset;
use crate::nn::{cnn_lstm, forecast, train, TrainConfig};

/// One grid point: conv(conv_filters) → maxpool(pool) → lstm(lstm_units…) →
/// flatten → dense(1), trained with `batch`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEntry {
    pub batch: usize,
    pub conv_filters: usize,
    pub pool: usize,
    pub lstm_units: Vec<usize>,
}

impl SweepEntry {
    pub fn label(&self) -> String {
        let lstm: Vec<String> = self.lstm_units.iter().map(|u| u.to_string()).collect();
        format!("b{}-c{}-p{}-l{}", self.batch, self.conv_filters, self.pool, lstm.join("x"))
    }
}

/// The nine cases of the reference hyperparameter table.
pub fn default_grid() -> Vec<SweepEntry> {
    [
        (32, 16, 2, [25, 50]),
        (64, 32, 2, [50, 75]),
        (32, 16, 4, [25, 50]),
        (64, 32, 4, [50, 75]),
        (16, 16, 2, [50, 50]),
        (128, 16, 4, [25, 50]),
        (16, 32, 2, [25, 75]),
        (128, 32, 2, [25, 50]),
        (64, 32, 2, [25, 50]),
    ]
    .into_iter()
    .map(|(batch, conv_filters, pool, lstm)| SweepEntry {
        batch,
        conv_filters,
        pool,
        lstm_units: lstm.to_vec(),
    })
    .collect()
}

/// Trains and scores every grid entry with the same seed, on the test split
/// in physical units. A failing entry yields a row carrying the error; the
/// others still run. Rows follow grid order.
pub fn sweep(grid: &[SweepEntry], data: &ForecastDataset, base: &TrainConfig, seed: u64) -> EvalReport {
    let rows = grid
        .par_iter()
        .map(|entry| {
            let label = entry.label();
            let spec = cnn_lstm(entry.conv_filters, entry.pool, &entry.lstm_units, data.window, seed);
            let cfg = TrainConfig {
                batch_size: entry.batch,
                ..base.clone()
            };
            let started = Instant::now();
            let trained = train(&spec, data, &cfg);
            let runtime = started.elapsed().as_secs_f64();
            let outcome = trained.and_then(|t| forecast(&t.network, data, data.split.test.clone()));
            match outcome {
                Ok(pred) => {
                    let truth: Vec<f64> = data.targets[data.split.test.clone()]
                        .iter()
                        .map(|&z| data.scale.denormalize(z))
                        .collect();
                    EvalRow::score(&data.channel, &label, &truth, &pred, runtime)
                }
                Err(e) => EvalRow::failed(&data.channel, &label, e.to_string(), runtime),
            }
        })
        .collect();
    EvalReport { rows }
}
