//! Conditional denoising diffusion over one sub-trajectory stream.
//!
//! The planner instantiates this twice, once per frequency band. Both
//! instances share a [`NoiseSchedule`] but own their parameters.

mod denoiser;
mod guidance;
mod loss;
mod schedule;

pub use denoiser::{timestep_embedding, Denoiser, DenoiserConfig};
pub use guidance::{
    combine_guidance, denoise_step, guided_epsilon, posterior_mean, sample, EpsilonModel,
    GuidanceConfig, DEFAULT_OMEGA, DEFAULT_TEMP,
};
pub use loss::{training_loss, LossOutput, TapeEpsilonModel, TrainingItem, DEFAULT_P_NULL};
pub use schedule::{
    forward_noise, standard_normal, NoiseSchedule, BETA_END, BETA_START, DEFAULT_STEPS,
};
