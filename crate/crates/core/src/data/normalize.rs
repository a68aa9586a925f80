use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::frame::{Cell, MonitoringSeries};
use crate::error::{Error, Result};

/// Per-channel z-score parameters (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub channels: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormalizationStats {
    pub fn channel(&self, id: &str) -> Result<ChannelScale> {
        let i = self
            .channels
            .iter()
            .position(|c| c == id)
            .ok_or_else(|| Error::Schema(format!("no statistics for channel `{id}`")))?;
        Ok(ChannelScale {
            mean: self.mean[i],
            std: self.std[i],
        })
    }
}

/// Scale of a single channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelScale {
    pub mean: f64,
    pub std: f64,
}

impl ChannelScale {
    pub const IDENTITY: ChannelScale = ChannelScale { mean: 0.0, std: 1.0 };

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Mean and population standard deviation of a sample.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Fits μ and σ per channel over the frames in `train` only. Cells with any
/// payload contribute except those flagged abnormal.
pub fn zscore_fit(series: &MonitoringSeries, train: Range<usize>) -> Result<NormalizationStats> {
    if train.is_empty() || train.end > series.len() {
        return Err(Error::InsufficientData(format!(
            "training range {train:?} is empty or exceeds {} frames",
            series.len()
        )));
    }
    let mut mean = Vec::new();
    let mut std = Vec::new();
    for (ch, id) in series.channels().iter().enumerate() {
        let values: Vec<f64> = series.frames()[train.clone()]
            .iter()
            .filter_map(|f| f.cells[ch].clean_value())
            .collect();
        if values.is_empty() {
            return Err(Error::DegenerateChannel(id.clone()));
        }
        let (m, s) = mean_std(&values);
        // relative guard so float noise on a constant channel is still caught
        if !(s > 1e-12 * m.abs().max(1.0)) {
            return Err(Error::DegenerateChannel(id.clone()));
        }
        mean.push(m);
        std.push(s);
    }
    Ok(NormalizationStats {
        channels: series.channels().to_vec(),
        mean,
        std,
    })
}

fn check_channels(series: &MonitoringSeries, stats: &NormalizationStats) -> Result<()> {
    if series.channels() != stats.channels.as_slice() {
        return Err(Error::Schema(format!(
            "statistics cover {:?}, series has {:?}",
            stats.channels,
            series.channels()
        )));
    }
    Ok(())
}

fn map_all(
    series: &MonitoringSeries,
    stats: &NormalizationStats,
    f: impl Fn(ChannelScale, f64) -> f64,
) -> Result<MonitoringSeries> {
    check_channels(series, stats)?;
    let mut out = series.clone();
    for ch in 0..series.channels().len() {
        let scale = ChannelScale {
            mean: stats.mean[ch],
            std: stats.std[ch],
        };
        let column: Vec<Cell> = series.column(ch).into_iter().map(|c| c.map(|v| f(scale, v))).collect();
        out = out.with_column(ch, &column)?;
    }
    Ok(out)
}

pub fn zscore_apply(series: &MonitoringSeries, stats: &NormalizationStats) -> Result<MonitoringSeries> {
    map_all(series, stats, |s, v| s.normalize(v))
}

pub fn zscore_invert(series: &MonitoringSeries, stats: &NormalizationStats) -> Result<MonitoringSeries> {
    map_all(series, stats, |s, v| s.denormalize(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::frame::MonitoringFrame;
    use proptest::prelude::*;

    fn series(values: &[f64]) -> MonitoringSeries {
        let frames = values
            .iter()
            .enumerate()
            .map(|(i, &v)| MonitoringFrame {
                timestamp: i as i64,
                cells: vec![Cell::Observed(v)],
            })
            .collect();
        MonitoringSeries::new(vec!["x".into()], frames).unwrap()
    }

    #[test]
    fn hand_computed_mean_and_population_std() {
        let st = zscore_fit(&series(&[1.0, 2.0, 3.0]), 0..3).unwrap();
        assert_eq!(st.mean, vec![2.0]);
        assert!((st.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constant_channel_is_degenerate() {
        assert!(matches!(
            zscore_fit(&series(&[5.0, 5.0, 5.0]), 0..3),
            Err(Error::DegenerateChannel(_))
        ));
        assert!(matches!(
            zscore_fit(&series(&[0.1, 0.1, 0.1]), 0..3),
            Err(Error::DegenerateChannel(_))
        ));
    }

    #[test]
    fn fit_uses_train_range_only() {
        let st = zscore_fit(&series(&[1.0, 3.0, 100.0, 200.0]), 0..2).unwrap();
        assert_eq!(st.mean, vec![2.0]);
        assert_eq!(st.std, vec![1.0]);
    }

    #[test]
    fn standardized_channel_refits_to_unit() {
        let raw: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 3.0 + 1.0).collect();
        let s = series(&raw);
        let st = zscore_fit(&s, 0..50).unwrap();
        let z = zscore_apply(&s, &st).unwrap();
        let again = zscore_fit(&z, 0..50).unwrap();
        assert!(again.mean[0].abs() < 1e-9);
        assert!((again.std[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn centering_and_unit_scale() {
        let s = ChannelScale { mean: 4.57, std: 0.2 };
        assert_eq!(s.normalize(4.57), 0.0);
        assert!((s.normalize(4.57 + 0.2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn channel_mismatch_is_schema_error() {
        let st = NormalizationStats {
            channels: vec!["y".into()],
            mean: vec![0.0],
            std: vec![1.0],
        };
        assert!(matches!(zscore_apply(&series(&[1.0, 2.0]), &st), Err(Error::Schema(_))));
    }

    #[test]
    fn empty_range_rejected() {
        assert!(zscore_fit(&series(&[1.0, 2.0]), 1..1).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(values in prop::collection::vec(-1e3f64..1e3, 50)) {
            let s = series(&values);
            let Ok(st) = zscore_fit(&s, 0..values.len()) else { return Ok(()); };
            let back = zscore_invert(&zscore_apply(&s, &st).unwrap(), &st).unwrap();
            for (a, b) in s.column(0).iter().zip(back.column(0)) {
                let (a, b) = (a.value().unwrap(), b.value().unwrap());
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}
