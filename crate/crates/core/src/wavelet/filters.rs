use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Orthonormal wavelet families shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wavelet {
    Haar,
    Db2,
    Db4,
}

impl Wavelet {
    pub const ALL: [Wavelet; 3] = [Wavelet::Haar, Wavelet::Db2, Wavelet::Db4];

    pub fn filters(self) -> FilterPair {
        FilterPair::new(self)
    }

    pub fn name(self) -> &'static str {
        match self {
            Wavelet::Haar => "haar",
            Wavelet::Db2 => "db2",
            Wavelet::Db4 => "db4",
        }
    }

    /// Scaling (low-pass) coefficients in analysis order.
    fn scaling(self) -> Vec<f64> {
        match self {
            Wavelet::Haar => vec![std::f64::consts::FRAC_1_SQRT_2; 2],
            Wavelet::Db2 => vec![
                0.482_962_913_144_690_25,
                0.836_516_303_737_469,
                0.224_143_868_041_857_35,
                -0.129_409_522_550_921_45,
            ],
            Wavelet::Db4 => vec![
                0.230_377_813_308_855_23,
                0.714_846_570_552_541_5,
                0.630_880_767_929_590_4,
                -0.027_983_769_416_983_85,
                -0.187_034_811_718_881_14,
                0.030_841_381_835_986_965,
                0.032_883_011_666_982_945,
                -0.010_597_401_784_997_278,
            ],
        }
    }
}

impl fmt::Display for Wavelet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Wavelet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "haar" | "db1" => Ok(Wavelet::Haar),
            "db2" => Ok(Wavelet::Db2),
            "db4" => Ok(Wavelet::Db4),
            other => Err(Error::Config(format!("unknown wavelet `{other}` (haar, db2, db4)"))),
        }
    }
}

/// Analysis filters. Both are applied as correlations against the extended
/// signal, `out[n] = Σ_k f[k]·x[2n + k + 2 − len]`; with orthonormal filters the
/// synthesis side is the transpose of that map and uses the same taps.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterPair {
    pub wavelet: Wavelet,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl FilterPair {
    pub fn new(wavelet: Wavelet) -> Self {
        let low = wavelet.scaling();
        let n = low.len();
        // quadrature mirror: high[k] = (-1)^k low[n-1-k]
        let high = (0..n)
            .map(|k| if k % 2 == 0 { low[n - 1 - k] } else { -low[n - 1 - k] })
            .collect();
        Self { wavelet, low, high }
    }

    pub fn len(&self) -> usize {
        self.low.len()
    }

    pub fn is_empty(&self) -> bool {
        self.low.is_empty()
    }

    /// Reconstruction low-pass, in convolution order.
    pub fn reconstruction_low(&self) -> &[f64] {
        &self.low
    }

    /// Reconstruction high-pass, in convolution order.
    pub fn reconstruction_high(&self) -> &[f64] {
        &self.high
    }
}
