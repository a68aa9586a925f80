use serde::{Deserialize, Serialize};

use super::filters::Wavelet;
use super::threshold::{rigrsure, shrink, RiskTail, ShrinkMode};
use super::transform::{decompose, reconstruct, Boundary, WaveletDecomposition};
use crate::data::median;
use crate::error::Result;

/// Gaussian consistency constant for the median absolute value.
pub const MAD_GAUSSIAN: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DenoiseConfig {
    pub wavelet: Wavelet,
    pub level: usize,
    pub mode: ShrinkMode,
    pub boundary: Boundary,
    pub risk_tail: RiskTail,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            wavelet: Wavelet::Db4,
            level: 4,
            mode: ShrinkMode::Soft,
            boundary: Boundary::Symmetric,
            risk_tail: RiskTail::default(),
        }
    }
}

/// Noise scale from the finest detail band: median(|oH_1|) / 0.6745.
pub fn noise_scale(finest: &[f64]) -> f64 {
    if finest.is_empty() {
        return 0.0;
    }
    let mut abs: Vec<f64> = finest.iter().map(|w| w.abs()).collect();
    median(&mut abs) / MAD_GAUSSIAN
}

/// Thresholds every detail band in place; the approximation band is left alone.
/// Returns the per-band thresholds, finest first.
pub fn shrink_details(d: &mut WaveletDecomposition, cfg: &DenoiseConfig) -> Result<Vec<f64>> {
    let sigma = noise_scale(&d.details[0]);
    if sigma <= 0.0 {
        return Ok(vec![0.0; d.details.len()]);
    }
    let mut thresholds = Vec::with_capacity(d.details.len());
    for band in d.details.iter_mut() {
        let thr = rigrsure(band, sigma, cfg.risk_tail)?.threshold;
        *band = shrink(band, thr, cfg.mode);
        thresholds.push(thr);
    }
    Ok(thresholds)
}

/// Decompose, shrink detail bands with per-band rigrsure thresholds, and
/// reconstruct. Output length equals input length.
pub fn denoise(x: &[f64], cfg: &DenoiseConfig) -> Result<Vec<f64>> {
    let mut d = decompose(x, cfg.wavelet, cfg.level, cfg.boundary)?;
    shrink_details(&mut d, cfg)?;
    reconstruct(&d)
}
