use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::DEFAULT_MAD_K;
use crate::error::{Error, Result};
use crate::impute::{ForestParams, DEFAULT_CORRELATION_THRESHOLD, DEFAULT_PREDICTORS, MIN_SOBOL_SAMPLES};
use crate::nn::{build_preset, NetworkSpec, TrainConfig};
use crate::wavelet::DenoiseConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NiConfig {
    pub enabled: bool,
    pub predictors: Vec<String>,
    /// `forest.seed` is replaced by the run seed.
    pub forest: ForestParams,
    /// Also write the correlation screen, importances and Sobol indices.
    pub analyze: bool,
    pub sobol_samples: usize,
    pub correlation_threshold: f64,
}

impl Default for NiConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            predictors: DEFAULT_PREDICTORS.iter().map(|s| s.to_string()).collect(),
            forest: ForestParams::default(),
            analyze: false,
            sobol_samples: 1024,
            correlation_threshold: DEFAULT_CORRELATION_THRESHOLD,
        }
    }
}

/// Which frames one wavelet pass sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DenoiseScope {
    /// Train, validation and test frames are denoised separately, so no
    /// later value leaks into an earlier window.
    #[default]
    Split,
    /// One pass over the whole series.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveletStage {
    pub enabled: bool,
    pub denoise: DenoiseConfig,
    pub scope: DenoiseScope,
}

impl Default for WaveletStage {
    fn default() -> Self {
        Self {
            enabled: true,
            denoise: DenoiseConfig::default(),
            scope: DenoiseScope::Split,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkChoice {
    Preset(String),
    /// `seed` is replaced by the run seed and `input_len` must equal `seq_len`.
    Spec(NetworkSpec),
}

impl Default for NetworkChoice {
    fn default() -> Self {
        NetworkChoice::Preset("cnn-lstm-2".into())
    }
}

/// What forecasts are scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruthMode {
    #[default]
    Raw,
    Denoised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub output_dir: PathBuf,
    /// Channels to forecast; empty means every channel that is not a predictor.
    pub stations: Vec<String>,
    pub seed: u64,
    pub abnormal_k: f64,
    pub ni: NiConfig,
    pub wavelet: WaveletStage,
    pub network: NetworkChoice,
    pub seq_len: usize,
    pub train: TrainConfig,
    pub truth: TruthMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::from("data.csv"),
            output_dir: PathBuf::from("out"),
            stations: Vec::new(),
            seed: 0,
            abnormal_k: DEFAULT_MAD_K,
            ni: NiConfig::default(),
            wavelet: WaveletStage::default(),
            network: NetworkChoice::default(),
            seq_len: 10,
            train: TrainConfig::default(),
            truth: TruthMode::Raw,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|_| Error::NotFound(path.to_path_buf()))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abnormal_k > 0.0 && self.abnormal_k.is_finite()) {
            return Err(Error::Config(format!("abnormal_k must be > 0, got {}", self.abnormal_k)));
        }
        if self.seq_len == 0 {
            return Err(Error::Config("seq_len must be at least 1".into()));
        }
        if self.ni.analyze && self.ni.sobol_samples < MIN_SOBOL_SAMPLES {
            return Err(Error::Config(format!("sobol_samples must be at least {MIN_SOBOL_SAMPLES}")));
        }
        if self.wavelet.enabled && self.wavelet.denoise.level == 0 {
            return Err(Error::Config("wavelet level must be at least 1".into()));
        }
        self.train.validate()?;
        self.network_spec()?;
        Ok(())
    }

    /// The network every station is trained with.
    pub fn network_spec(&self) -> Result<NetworkSpec> {
        let spec = match &self.network {
            NetworkChoice::Preset(name) => build_preset(name, self.seq_len, self.seed)?,
            NetworkChoice::Spec(spec) => {
                if spec.input_len != self.seq_len {
                    return Err(Error::Config(format!(
                        "network input_len {} differs from seq_len {}",
                        spec.input_len, self.seq_len
                    )));
                }
                NetworkSpec { seed: self.seed, ..spec.clone() }
            }
        };
        spec.shapes()?;
        Ok(spec)
    }

    /// Report label, e.g. `wavelet-cnn-lstm-2`.
    pub fn model_label(&self) -> String {
        let base = match &self.network {
            NetworkChoice::Preset(name) => name.clone(),
            NetworkChoice::Spec(_) => "custom".into(),
        };
        if self.wavelet.enabled {
            format!("wavelet-{base}")
        } else {
            base
        }
    }

    /// The configuration with both paths cleared: what a run's results depend on
    /// besides the input bytes.
    pub fn canonical_json(&self) -> Result<String> {
        let mut c = self.clone();
        c.input = PathBuf::new();
        c.output_dir = PathBuf::new();
        Ok(serde_json::to_string(&c)?)
    }
}
