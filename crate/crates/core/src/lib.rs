//! Frequency-aware trajectory diffusion for offline planning.
//!
//! State trajectories are split by a one-level wavelet transform into low-
//! and high-frequency streams. A Fourier/cross-attention conditioner lets
//! each stream see the other, two conditional diffusion models generate the
//! streams, and the inverse transform plus an inverse-dynamics model turn the
//! generated plan into actions.
//!
//! Module map:
//! - [`spectral`]: wavelet transform, DFT, energy density, loss spectra
//! - [`numerics`]: tensors, reverse-mode tape, layers, Adam, checkpoints
//! - [`cffc`]: the cross Fourier fusion conditioner
//! - [`diffusion`]: noise schedule, denoiser, guidance and sampling
//! - [`worldkit`]: synthetic environments, datasets, inverse dynamics
//! - [`pipeline`]: training, closed-loop planning, evaluation, ablations

pub mod cffc;
pub mod diffusion;
mod error;
pub mod numerics;
pub mod pipeline;
pub mod spectral;
pub mod worldkit;

pub use error::{Error, Result};
