//! Synthetic control tasks, offline datasets and the inverse-dynamics model.

mod dataset;
mod env;
mod inverse;
mod policy;
mod returns;

pub use dataset::{
    checksum_bytes, generate_dataset, generate_mixture, rollout, Dataset, Episode, FORMAT_VERSION,
    REPLAY_TOLERANCE,
};
pub use env::{
    EnvKind, Environment, Transition, DEFAULT_GAMMA, DT, OSCILLATOR_DAMPING, OSCILLATOR_STIFFNESS,
};
pub use inverse::{
    train_inverse_dynamics, InverseDynamics, InverseDynamicsConfig, InverseDynamicsReport,
    Standardizer,
};
pub use policy::{Policy, PolicySpec};
pub use returns::{discounted_return, episode_return, normalize_returns, ReturnNormalizer};
