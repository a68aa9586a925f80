//! Central-difference verification of analytic gradients.

use serde::Serialize;

use super::layers::{Activation, LayerSpec};
use super::network::{Network, NetworkSpec};
use super::train::{batch_gradients, Loss};
use crate::error::{Error, Result};

pub const LAYER_KINDS: [&str; 7] = ["conv1d", "maxpool", "flatten", "dense", "lstm", "gru", "rnn"];

/// Denominator floor of [`relative_error`]; keeps near-zero gradient pairs
/// from reporting noise as error.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-7;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_param_error: f64,
    pub max_input_error: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.max_param_error.max(self.max_input_error)
    }
}

fn batch_loss(net: &Network, inputs: &[Vec<f64>], targets: &[f64]) -> f64 {
    inputs
        .iter()
        .zip(targets)
        .map(|(x, &y)| Loss::Mse.value(net.predict(x).unwrap(), y))
        .sum::<f64>()
        / inputs.len() as f64
}

/// Compares backpropagated gradients of the mean-squared loss against central
/// differences with step `eps`, for every parameter and every input value.
pub fn gradient_check(net: &Network, inputs: &[Vec<f64>], targets: &[f64], eps: f64) -> Result<GradCheckReport> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::Shape("gradient check needs matching, non-empty inputs and targets".into()));
    }
    for x in inputs {
        net.predict(x)?;
    }
    let mut grads = net.zero_grads();
    batch_gradients(net, inputs, targets, Loss::Mse, &mut grads);

    let mut probe = net.clone();
    let mut max_param_error: f64 = 0.0;
    let mut checked = 0;
    for (ti, g) in grads.iter().enumerate() {
        for k in 0..g.data.len() {
            let orig = probe.params()[ti].data[k];
            probe.params_mut()[ti].data[k] = orig + eps;
            let up = batch_loss(&probe, inputs, targets);
            probe.params_mut()[ti].data[k] = orig - eps;
            let down = batch_loss(&probe, inputs, targets);
            probe.params_mut()[ti].data[k] = orig;
            max_param_error = max_param_error.max(relative_error(g.data[k], (up - down) / (2.0 * eps)));
            checked += 1;
        }
    }

    let n = inputs.len() as f64;
    let mut max_input_error: f64 = 0.0;
    for (x, &y) in inputs.iter().zip(targets) {
        let (out, caches) = net.forward_cached(x);
        let mut sink = net.zero_grads();
        let dx = net.backward(&caches, &[Loss::Mse.gradient(out[0], y) / n], &mut sink);
        let mut xp = x.clone();
        for k in 0..x.len() {
            let loss_at = |v: f64, xp: &mut Vec<f64>| {
                xp[k] = v;
                Loss::Mse.value(net.predict(xp).unwrap(), y) / n
            };
            let up = loss_at(x[k] + eps, &mut xp);
            let down = loss_at(x[k] - eps, &mut xp);
            xp[k] = x[k];
            max_input_error = max_input_error.max(relative_error(dx[k], (up - down) / (2.0 * eps)));
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_param_error,
        max_input_error,
        checked,
    })
}

/// A tiny network (window 8, width 4) exercising one layer kind, followed by
/// whatever it needs to reach a scalar output.
pub fn probe_network(kind: &str, seed: u64) -> Result<Network> {
    let dense1 = LayerSpec::Dense { units: 1, activation: Activation::Linear };
    let tanh_conv = LayerSpec::Conv1d { filters: 3, kernel: 3, activation: Activation::Tanh };
    let layers = match kind {
        "conv1d" => vec![
            LayerSpec::Conv1d { filters: 4, kernel: 3, activation: Activation::Tanh },
            LayerSpec::Conv1d { filters: 2, kernel: 5, activation: Activation::Sigmoid },
            LayerSpec::Flatten,
            dense1,
        ],
        "maxpool" => vec![tanh_conv, LayerSpec::MaxPool { size: 3 }, LayerSpec::Flatten, dense1],
        "flatten" => vec![tanh_conv, LayerSpec::Flatten, dense1],
        "dense" => vec![
            LayerSpec::Dense { units: 4, activation: Activation::Tanh },
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 3, activation: Activation::Sigmoid },
            dense1,
        ],
        "lstm" => vec![tanh_conv, LayerSpec::Lstm { units: 4 }, LayerSpec::Flatten, dense1],
        "gru" => vec![tanh_conv, LayerSpec::Gru { units: 4 }, LayerSpec::Flatten, dense1],
        "rnn" => vec![tanh_conv, LayerSpec::Rnn { units: 4 }, LayerSpec::Flatten, dense1],
        other => return Err(Error::Config(format!("unknown layer kind `{other}`"))),
    };
    Network::new(NetworkSpec { input_len: 8, input_channels: 1, layers, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn batch(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = crate::rng::substream(seed, "gradcheck-data");
        let xs = (0..3).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ys = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        (xs, ys)
    }

    #[test]
    fn every_layer_kind_passes() {
        for kind in LAYER_KINDS {
            for seed in 0..3 {
                let net = probe_network(kind, seed).unwrap();
                let (xs, ys) = batch(seed);
                let r = gradient_check(&net, &xs, &ys, 1e-5).unwrap();
                assert!(r.max_error() < 1e-4, "{kind} seed {seed}: {r:?}");
            }
        }
    }

    #[test]
    fn perfect_prediction_has_zero_gradients() {
        let net = probe_network("lstm", 1).unwrap();
        let (xs, _) = batch(1);
        let ys: Vec<f64> = xs.iter().map(|x| net.predict(x).unwrap()).collect();
        let mut g = net.zero_grads();
        batch_gradients(&net, &xs, &ys, Loss::Mse, &mut g);
        assert!(g.iter().all(|t| t.data.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn gradients_are_linear_in_loss_scale() {
        let net = probe_network("gru", 2).unwrap();
        let (xs, ys) = batch(2);
        let (out, caches) = net.forward_cached(&xs[0]);
        let d = Loss::Mse.gradient(out[0], ys[0]);
        let (mut g1, mut g2) = (net.zero_grads(), net.zero_grads());
        net.backward(&caches, &[d], &mut g1);
        net.backward(&caches, &[2.0 * d], &mut g2);
        for (a, b) in g1.iter().zip(&g2) {
            for (x, y) in a.data.iter().zip(&b.data) {
                assert!((2.0 * x - y).abs() <= 1e-15 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!(relative_error(1e-12, 0.0) < 1e-4);
    }
}
