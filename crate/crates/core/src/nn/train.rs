use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{Network, NetworkSpec};
use super::optim::{adam_step, AdamConfig, AdamState};
use super::tensor::Tensor;
use crate::data::{ChannelScale, ForecastDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Mse,
    Mae,
}

impl Loss {
    pub fn value(self, pred: f64, target: f64) -> f64 {
        let e = pred - target;
        match self {
            Loss::Mse => e * e,
            Loss::Mae => e.abs(),
        }
    }

    pub fn gradient(self, pred: f64, target: f64) -> f64 {
        let e = pred - target;
        match self {
            Loss::Mse => 2.0 * e,
            Loss::Mae => e.signum() * (e != 0.0) as u8 as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub loss: Loss,
    /// Epochs without a validation improvement before stopping; `None` trains
    /// for every epoch.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 120,
            batch_size: 64,
            learning_rate: 1e-3,
            weight_decay: 5e-3,
            loss: Loss::Mse,
            patience: Some(15),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("invalid learning rate {}", self.learning_rate)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!("invalid weight decay {}", self.weight_decay)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights from the epoch with the lowest monitored loss.
    pub network: Network,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Mean loss over `inputs`/`targets`.
pub fn evaluate_loss(net: &Network, inputs: &[Vec<f64>], targets: &[f64], loss: Loss) -> Result<f64> {
    if inputs.is_empty() {
        return Err(Error::InsufficientData("no samples to evaluate".into()));
    }
    let preds = predict_batch(net, inputs)?;
    Ok(preds.iter().zip(targets).map(|(p, t)| loss.value(*p, *t)).sum::<f64>() / preds.len() as f64)
}

/// Loss and accumulated gradients of one batch; gradients are of the batch mean.
pub(crate) fn batch_gradients(
    net: &Network,
    inputs: &[Vec<f64>],
    targets: &[f64],
    loss: Loss,
    grads: &mut [Tensor],
) -> f64 {
    grads.iter_mut().for_each(|g| g.fill(0.0));
    let scale = 1.0 / inputs.len() as f64;
    let mut total = 0.0;
    for (x, &y) in inputs.iter().zip(targets) {
        let (out, caches) = net.forward_cached(x);
        total += loss.value(out[0], y);
        net.backward(&caches, &[loss.gradient(out[0], y) * scale], grads);
    }
    total * scale
}

/// Mini-batch training on the dataset's train split in chronological order
/// (no shuffling). The validation split drives early stopping when present;
/// otherwise the train loss is monitored.
pub fn train(spec: &NetworkSpec, data: &ForecastDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let net = Network::new(spec.clone())?;
    train_from(net, data, cfg)
}

/// As [`train`], starting from given weights.
pub fn train_from(mut net: Network, data: &ForecastDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if net.spec().input_len != data.window || net.spec().input_channels != 1 {
        return Err(Error::Shape(format!(
            "network expects [{} × {}] windows, dataset has length {}",
            net.spec().input_len,
            net.spec().input_channels,
            data.window
        )));
    }
    let (xs, ys) = data.subset(data.split.train.clone());
    if xs.is_empty() {
        return Err(Error::InsufficientData("training split is empty".into()));
    }
    let (vx, vy) = data.subset(data.split.validation.clone());
    let opt = AdamConfig {
        lr: cfg.learning_rate,
        weight_decay: cfg.weight_decay,
        ..Default::default()
    };
    let mut state = AdamState::new(net.params());
    let mut grads = net.zero_grads();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, 0usize, net.params().to_vec());
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        let mut sum = 0.0;
        for (batch, start) in (0..xs.len()).step_by(cfg.batch_size).enumerate() {
            let end = (start + cfg.batch_size).min(xs.len());
            let l = batch_gradients(&net, &xs[start..end], &ys[start..end], cfg.loss, &mut grads);
            if !l.is_finite() || grads.iter().any(|g| !g.all_finite()) {
                return Err(Error::NumericFault {
                    epoch,
                    batch,
                    what: "non-finite loss or gradient".into(),
                });
            }
            sum += l * (end - start) as f64;
            adam_step(net.params_mut(), &grads, &mut state, &opt)?;
            if net.params().iter().any(|p| !p.all_finite()) {
                return Err(Error::NumericFault {
                    epoch,
                    batch,
                    what: "non-finite parameter after update".into(),
                });
            }
        }
        let train_loss = sum / xs.len() as f64;
        let validation_loss = if vx.is_empty() {
            None
        } else {
            let v = evaluate_loss(&net, &vx, &vy, cfg.loss)?;
            if !v.is_finite() {
                return Err(Error::NumericFault {
                    epoch,
                    batch: 0,
                    what: "non-finite validation loss".into(),
                });
            }
            Some(v)
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            validation_loss,
        });
        let monitored = validation_loss.unwrap_or(train_loss);
        if monitored < best.0 {
            best = (monitored, epoch, net.params().to_vec());
        } else if cfg.patience.is_some_and(|p| epoch - best.1 >= p) {
            stopped_early = true;
            break;
        }
    }
    let (_, best_epoch, params) = best;
    let network = Network::from_params(net.spec().clone(), params)?;
    Ok(TrainOutcome {
        network,
        history,
        best_epoch,
        stopped_early,
    })
}

/// Forward passes over many windows, in parallel; output in input order.
pub fn predict_batch(net: &Network, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
    inputs.par_iter().map(|x| net.predict(x)).collect()
}

/// Predictions for a window range of `data`, mapped back to physical units.
pub fn forecast(net: &Network, data: &ForecastDataset, range: Range<usize>) -> Result<Vec<f64>> {
    let (xs, _) = data.subset(range);
    Ok(predict_batch(net, &xs)?.into_iter().map(|z| data.scale.denormalize(z)).collect())
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned on-disk form of a trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub spec: NetworkSpec,
    pub params: Vec<Tensor>,
    /// Scale that maps network outputs back to physical units.
    pub scale: ChannelScale,
    /// Digest of the normalization statistics the inputs were scaled with.
    pub stats_digest: String,
    pub seed: u64,
    pub history: Vec<EpochRecord>,
}

impl Checkpoint {
    pub fn new(net: &Network, scale: ChannelScale, stats_digest: String, history: Vec<EpochRecord>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            spec: net.spec().clone(),
            params: net.params().to_vec(),
            scale,
            stats_digest,
            seed: net.spec().seed,
            history,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint version {}", ck.version)));
        }
        ck.network()?;
        Ok(ck)
    }

    pub fn network(&self) -> Result<Network> {
        Network::from_params(self.spec.clone(), self.params.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_windows, Cell, MonitoringFrame, MonitoringSeries};
    use crate::nn::layers::{Activation, LayerSpec};

    fn dataset(values: &[f64], window: usize) -> ForecastDataset {
        let frames = values
            .iter()
            .enumerate()
            .map(|(i, v)| MonitoringFrame { timestamp: i as i64, cells: vec![Cell::Observed(*v)] })
            .collect();
        let s = MonitoringSeries::new(vec!["y".into()], frames).unwrap();
        make_windows(&s, window, "y").unwrap()
    }

    fn small_spec(seed: u64) -> NetworkSpec {
        NetworkSpec {
            input_len: 6,
            input_channels: 1,
            layers: vec![
                LayerSpec::Conv1d { filters: 3, kernel: 3, activation: Activation::Relu },
                LayerSpec::MaxPool { size: 2 },
                LayerSpec::Lstm { units: 4 },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 1, activation: Activation::Linear },
            ],
            seed,
        }
    }

    #[test]
    fn constant_target_reaches_bias_solution() {
        let data = dataset(&[0.7; 400], 6);
        let cfg = TrainConfig { epochs: 50, batch_size: 8, weight_decay: 0.0, patience: None, ..Default::default() };
        let out = train(&small_spec(1), &data, &cfg).unwrap();
        let last = out.history.last().unwrap();
        assert!(last.train_loss < 1e-6, "{last:?}");
        assert!((out.network.predict(&[0.7; 6]).unwrap() - 0.7).abs() < 1e-3);
        for w in out.history[3..].windows(2) {
            assert!(w[1].train_loss <= w[0].train_loss * (1.0 + 1e-9) + 1e-12, "{w:?}");
        }
    }

    #[test]
    fn zero_learning_rate_keeps_initial_weights() {
        let data = dataset(&(0..60).map(|i| (i as f64 * 0.3).sin()).collect::<Vec<_>>(), 6);
        let cfg = TrainConfig { epochs: 1, learning_rate: 0.0, ..Default::default() };
        let out = train(&small_spec(2), &data, &cfg).unwrap();
        assert_eq!(out.network, Network::new(small_spec(2)).unwrap());
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let data = dataset(&(0..80).map(|i| (i as f64 * 0.2).sin()).collect::<Vec<_>>(), 6);
        let cfg = TrainConfig { epochs: 4, batch_size: 8, ..Default::default() };
        let a = train(&small_spec(3), &data, &cfg).unwrap();
        let b = train(&small_spec(3), &data, &cfg).unwrap();
        assert_eq!(a.network, b.network);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn patience_stops_and_restores_best() {
        let data = dataset(&(0..80).map(|i| (i as f64 * 0.2).sin()).collect::<Vec<_>>(), 6);
        let cfg = TrainConfig { epochs: 200, batch_size: 8, learning_rate: 0.05, patience: Some(3), ..Default::default() };
        let out = train(&small_spec(4), &data, &cfg).unwrap();
        let best = out.history.iter().map(|r| r.validation_loss.unwrap()).fold(f64::INFINITY, f64::min);
        let (vx, vy) = data.subset(data.split.validation.clone());
        assert_eq!(evaluate_loss(&out.network, &vx, &vy, Loss::Mse).unwrap(), best);
        if out.stopped_early {
            assert_eq!(out.history.len(), out.best_epoch + 3);
        }
    }

    #[test]
    fn exploding_rate_is_a_numeric_fault() {
        let data = dataset(&(0..80).map(|i| 1e200 * (i as f64 * 0.2).sin()).collect::<Vec<_>>(), 6);
        let cfg = TrainConfig { epochs: 3, ..Default::default() };
        assert!(matches!(train(&small_spec(5), &data, &cfg), Err(Error::NumericFault { epoch: 1, batch: 0, .. })));
    }

    #[test]
    fn window_mismatch_and_bad_config() {
        let data = dataset(&[1.0; 40], 5);
        assert!(matches!(train(&small_spec(1), &data, &TrainConfig::default()), Err(Error::Shape(_))));
        let data = dataset(&[1.0; 40], 6);
        let bad = TrainConfig { batch_size: 0, ..Default::default() };
        assert!(matches!(train(&small_spec(1), &data, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn checkpoint_round_trip() {
        let net = Network::new(small_spec(9)).unwrap();
        let history = vec![EpochRecord { epoch: 1, train_loss: 0.5, validation_loss: Some(0.25) }];
        let ck = Checkpoint::new(&net, ChannelScale { mean: 4.5, std: 0.2 }, "abc".into(), history);
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.network().unwrap(), net);
        let mut bad = ck.clone();
        bad.version = 7;
        assert!(matches!(Checkpoint::from_json(&bad.to_json().unwrap()), Err(Error::Config(_))));
        bad = ck;
        bad.params[0].data.pop();
        assert!(Checkpoint::from_json(&bad.to_json().unwrap()).is_err());
    }
}
