//! Small CPU network engine: 1-D convolution, max-pooling, flatten, dense,
//! LSTM/GRU/RNN cells, Adam and a finite-difference gradient checker.

mod gradcheck;
mod layers;
mod network;
mod optim;
mod presets;
mod recurrent;
mod tensor;
mod train;

pub use gradcheck::{gradient_check, probe_network, relative_error, GradCheckReport, LAYER_KINDS, RELATIVE_ERROR_FLOOR};
pub use layers::{conv1d_forward, maxpool_forward, Activation, LayerSpec};
pub use network::{Init, Network, NetworkSpec};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use presets::{build_preset, cnn_lstm, DEFAULT_KERNEL, PRESETS};
pub use recurrent::lstm_forward;
pub use tensor::Tensor;
pub use train::{
    evaluate_loss, forecast, predict_batch, train, train_from, Checkpoint, EpochRecord, Loss, TrainConfig,
    TrainOutcome, CHECKPOINT_VERSION,
};
