//! Saturation-line forecasting toolkit.
//!
//! * [`data`]: monitoring CSV ingest, abnormal-value flags, z-score scaling, windows.
//! * [`impute`]: numerical inversion of missing values (Pearson screening,
//!   random forest, Sobol indices).
//! * [`wavelet`]: Mallat DWT, rigrsure thresholds, shrinkage and reconstruction.
//! * [`nn`]: a small CPU network engine (conv1d, pooling, LSTM/GRU/RNN, dense, Adam).
//! * [`metrics`]: RMSE, MAPE, R², reports and the hyperparameter sweep.
//! * [`pipeline`]: synthetic data, configuration and the end-to-end run.

pub mod data;
pub mod digest;
pub mod error;
pub mod impute;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod wavelet;

pub use error::{Error, Result};
