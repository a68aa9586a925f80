use super::layers::{Activation, LayerSpec};
use super::network::NetworkSpec;
use crate::error::{Error, Result};

pub const PRESETS: [&str; 6] = ["cnn-lstm-1", "cnn-lstm-2", "mlp", "rnn", "gru", "lstm"];

pub const DEFAULT_KERNEL: usize = 3;

fn head() -> [LayerSpec; 2] {
    [LayerSpec::Flatten, LayerSpec::Dense { units: 1, activation: Activation::Linear }]
}

fn conv(filters: usize) -> LayerSpec {
    LayerSpec::Conv1d { filters, kernel: DEFAULT_KERNEL, activation: Activation::Relu }
}

/// conv(filters) → maxpool(pool) → lstm(u₁) → … → flatten → dense(1).
pub fn cnn_lstm(conv_filters: usize, pool: usize, lstm_units: &[usize], input_len: usize, seed: u64) -> NetworkSpec {
    let mut layers = vec![conv(conv_filters), LayerSpec::MaxPool { size: pool }];
    layers.extend(lstm_units.iter().map(|&units| LayerSpec::Lstm { units }));
    layers.extend(head());
    NetworkSpec { input_len, input_channels: 1, layers, seed }
}

/// Named architectures over single-channel windows of length `input_len`.
pub fn build_preset(name: &str, input_len: usize, seed: u64) -> Result<NetworkSpec> {
    let layers = match name {
        "cnn-lstm-1" => vec![conv(16), conv(32), LayerSpec::MaxPool { size: 2 }, LayerSpec::Lstm { units: 50 }],
        "cnn-lstm-2" => return Ok(cnn_lstm(32, 2, &[25, 50], input_len, seed)),
        "mlp" => vec![LayerSpec::Flatten, LayerSpec::Dense { units: 50, activation: Activation::Relu }],
        "rnn" => vec![LayerSpec::Rnn { units: 50 }],
        "gru" => vec![LayerSpec::Gru { units: 50 }],
        "lstm" => vec![LayerSpec::Lstm { units: 50 }],
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    let mut layers = layers;
    if name == "mlp" {
        layers.push(LayerSpec::Dense { units: 1, activation: Activation::Linear });
    } else {
        layers.extend(head());
    }
    let spec = NetworkSpec { input_len, input_channels: 1, layers, seed };
    spec.shapes()?;
    Ok(spec)
}
