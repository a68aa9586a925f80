//! rigrsure (SURE-based) threshold selection and coefficient shrinkage.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which sorted coefficient weights the `(N − t)` tail term of the risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskTail {
    /// `(N − t)·g(N − t)`: the undefined `f(N − t)` term read as `g(N − t)`.
    #[default]
    Mirrored,
    /// `(N − t)·g(t)`: Stein's unbiased risk for soft thresholding at `√g(t)`.
    Stein,
}

impl FromStr for RiskTail {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mirrored" => Ok(RiskTail::Mirrored),
            "stein" => Ok(RiskTail::Stein),
            other => Err(Error::Config(format!("unknown risk tail `{other}` (mirrored, stein)"))),
        }
    }
}

/// Result of a rigrsure scan over one band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigrsureThreshold {
    /// Threshold in coefficient units, `σ̂·√g(t_min)`.
    pub threshold: f64,
    /// Threshold in noise units, `√g(t_min)`.
    pub gamma: f64,
    pub noise_scale: f64,
    /// Squared, noise-scaled magnitudes sorted ascending; `g[k]` is g(k + 1).
    pub sorted_sq: Vec<f64>,
    /// `risk[t - 1]` is Risk(t) for t = 1..=N.
    pub risk: Vec<f64>,
    /// 1-based minimizer of the risk curve; ties go to the smallest t.
    pub t_min: usize,
}

pub fn rigrsure(band: &[f64], noise_scale: f64, tail: RiskTail) -> Result<RigrsureThreshold> {
    if band.is_empty() {
        return Err(Error::InsufficientData("rigrsure on an empty band".into()));
    }
    if !(noise_scale > 0.0 && noise_scale.is_finite()) {
        return Err(Error::Config(format!("noise scale must be positive, got {noise_scale}")));
    }
    let mut g: Vec<f64> = band
        .iter()
        .map(|w| {
            let s = w.abs() / noise_scale;
            s * s
        })
        .collect();
    g.sort_by(f64::total_cmp);
    let n = g.len();
    let nf = n as f64;
    let mut risk = Vec::with_capacity(n);
    let mut cumulative = 0.0;
    for t in 1..=n {
        cumulative += g[t - 1];
        let tail_term = match tail {
            RiskTail::Stein => (n - t) as f64 * g[t - 1],
            RiskTail::Mirrored if t < n => (n - t) as f64 * g[n - t - 1],
            RiskTail::Mirrored => 0.0,
        };
        risk.push((nf - 2.0 * t as f64 + cumulative + tail_term) / nf);
    }
    let mut best = 0;
    for (i, r) in risk.iter().enumerate() {
        if *r < risk[best] {
            best = i;
        }
    }
    let gamma = g[best].sqrt();
    Ok(RigrsureThreshold {
        threshold: noise_scale * gamma,
        gamma,
        noise_scale,
        sorted_sq: g,
        risk,
        t_min: best + 1,
    })
}

/// Coefficient shrinkage rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShrinkMode {
    #[default]
    Soft,
    Hard,
}

impl fmt::Display for ShrinkMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShrinkMode::Soft => "soft",
            ShrinkMode::Hard => "hard",
        })
    }
}

impl FromStr for ShrinkMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(ShrinkMode::Soft),
            "hard" => Ok(ShrinkMode::Hard),
            other => Err(Error::Config(format!("unknown shrink mode `{other}` (soft, hard)"))),
        }
    }
}

pub fn shrink(band: &[f64], gamma: f64, mode: ShrinkMode) -> Vec<f64> {
    band.iter()
        .map(|&w| match mode {
            ShrinkMode::Soft => w.signum() * (w.abs() - gamma).max(0.0),
            ShrinkMode::Hard => {
                if w.abs() > gamma {
                    w
                } else {
                    0.0
                }
            }
        })
        .map(|w| if w == 0.0 { 0.0 } else { w })
        .collect()
}
