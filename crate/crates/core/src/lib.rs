//! Time-domain source separation (TasNet / Conv-TasNet style) with
//! configurable cross-layer parameter sharing inside the dilated blocks.
//!
//! * [`numeric`]: tensors, conv kernels and reverse-mode differentiation
//! * [`sharing`]: sharing schemes, canonical parameter keys, store and audit
//! * [`model`]: network, presets and checkpoints
//! * [`metrics`]: SI-SNR / SDR and the permutation-invariant loss
//! * [`audio`]: WAV I/O, SNR mixing and the synthetic corpus
//! * [`experiment`]: training, ablation and robustness protocols

pub mod audio;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod sharing;

pub use error::{Error, Result};
