//! Monitoring records: CSV ingest, abnormality flags, z-score scaling and
//! chronological windowing.

mod abnormal;
mod frame;
mod normalize;
mod window;

use serde::{Deserialize, Serialize};

pub use abnormal::{flag_abnormal, flag_abnormal_channels, median, median_mad};
pub use frame::{
    ingest_csv, ingest_csv_auto, read_csv, read_schema, write_csv, Cell, MonitoringFrame, MonitoringSeries,
    Quality,
};
pub use normalize::{mean_std, zscore_apply, zscore_fit, zscore_invert, ChannelScale, NormalizationStats};
pub use window::{make_windows, make_windows_scaled, ForecastDataset, Split};

/// Default abnormality factor for the median ± k·MAD rule.
pub const DEFAULT_MAD_K: f64 = 6.0;

/// JSON description of a windowed dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub window: usize,
    pub channel: String,
    pub windows: usize,
    pub split: Split,
    pub normalization: ChannelScale,
    /// SHA-256 of the source CSV.
    pub source_digest: String,
}

impl DatasetManifest {
    pub fn describe(dataset: &ForecastDataset, source_digest: String) -> Self {
        Self {
            window: dataset.window,
            channel: dataset.channel.clone(),
            windows: dataset.len(),
            split: dataset.split.clone(),
            normalization: dataset.scale,
            source_digest,
        }
    }
}
