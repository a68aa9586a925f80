//! Discrete wavelet decomposition, rigrsure thresholding and reconstruction.

mod denoise;
mod filters;
mod threshold;
mod transform;

pub use denoise::{denoise, noise_scale, shrink_details, DenoiseConfig, MAD_GAUSSIAN};
pub use filters::{FilterPair, Wavelet};
pub use threshold::{rigrsure, shrink, RigrsureThreshold, RiskTail, ShrinkMode};
pub use transform::{
    decompose, dwt_step, idwt_step, level_lengths, max_level, reconstruct, Boundary, WaveletDecomposition,
};
