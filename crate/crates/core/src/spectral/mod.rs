//! Wavelet analysis/synthesis of trajectories and Fourier diagnostics.

mod diagnostics;
pub mod fourier;
mod wavelet;

pub use diagnostics::{
    average_energy_density, energy_density, loss_spectrum, pooled_band_ratio, EnergyDensity, LossSpectrumReport,
    DEFAULT_BAND_WIDTH,
};
pub use fourier::{dft, idft, SpectrumFrame};
pub use wavelet::{dwt, idwt, SubTrajectoryPair, WaveletFilterPair, WaveletKind};
