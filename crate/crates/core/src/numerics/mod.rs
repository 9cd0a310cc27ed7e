//! Minimal differentiable kernel: dense 2-D tensors, a reverse-mode tape,
//! the handful of layers the conditioner and denoiser need, Adam, a
//! finite-difference gradient checker and checkpoint I/O.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tape;
mod tensor;

pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use layers::{ffn_apply, linear, Conv1d, FfnParams, LayerNormParams, Linear, DEFAULT_HIDDEN};
pub use optim::{adam_step, Adam, DEFAULT_LEARNING_RATE};
pub use params::{Bound, ParamId, ParameterSet};
pub use tape::{softmax_rows, Gradients, Tape, Var};
pub use tensor::Tensor2D;
