use rand::Rng;
use serde::{Deserialize, Serialize};

use super::denoiser::Denoiser;
use super::schedule::{standard_normal, NoiseSchedule};
use crate::error::{Error, Result};
use crate::numerics::Tensor2D;

pub const DEFAULT_OMEGA: f64 = 1.2;
pub const DEFAULT_TEMP: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuidanceConfig {
    pub omega: f64,
    pub temp: f64,
    pub literal_update: bool,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            omega: DEFAULT_OMEGA,
            temp: DEFAULT_TEMP,
            literal_update: false,
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(Error::Config(format!("omega must be >= 0, got {}", self.omega)));
        }
        if !(0.0..=1.0).contains(&self.temp) {
            return Err(Error::Config(format!("temp must lie in [0, 1], got {}", self.temp)));
        }
        Ok(())
    }
}

/// Anything that predicts noise for a sequence at a network step.
/// `cond = None` selects the null condition.
pub trait EpsilonModel {
    fn epsilon(&self, x: &Tensor2D, cond: Option<&Tensor2D>, step: usize) -> Result<Tensor2D>;
}

impl EpsilonModel for Denoiser {
    fn epsilon(&self, x: &Tensor2D, cond: Option<&Tensor2D>, step: usize) -> Result<Tensor2D> {
        self.predict(x, cond, step)
    }
}

/// `null + ω·(cond − null)`
pub fn combine_guidance(conditional: &Tensor2D, null: &Tensor2D, omega: f64) -> Result<Tensor2D> {
    conditional.zip_map(null, |c, u| u + omega * (c - u))
}

pub fn guided_epsilon(
    model: &impl EpsilonModel,
    x: &Tensor2D,
    y: &Tensor2D,
    step: usize,
    cfg: &GuidanceConfig,
) -> Result<Tensor2D> {
    let conditional = model.epsilon(x, Some(y), step)?;
    let null = model.epsilon(x, None, step)?;
    combine_guidance(&conditional, &null, cfg.omega)
}

/// Reverse step from network step `i` (noise level `t = i + 1`) to `i − 1`.
/// Fresh noise is added for every level except the last.
pub fn posterior_mean(x: &Tensor2D, eps_hat: &Tensor2D, i: usize, sched: &NoiseSchedule) -> Result<Tensor2D> {
    if i >= sched.steps() {
        return Err(Error::OutOfRange(format!("diffusion step {i} outside 0..{}", sched.steps())));
    }
    let beta = sched.betas[i];
    let coef = beta / (1.0 - sched.alpha_bars[i]).sqrt();
    let inv = 1.0 / sched.alphas[i].sqrt();
    x.zip_map(eps_hat, |xv, e| inv * (xv - coef * e))
}

pub fn denoise_step(
    x: &Tensor2D,
    eps_hat: &Tensor2D,
    i: usize,
    sched: &NoiseSchedule,
    cfg: &GuidanceConfig,
    rng: &mut impl Rng,
) -> Result<Tensor2D> {
    if cfg.literal_update {
        return x.zip_map(eps_hat, |a, b| a - b);
    }
    let mut mean = posterior_mean(x, eps_hat, i, sched)?;
    if i > 0 && cfg.temp > 0.0 {
        let z = standard_normal(x.rows(), x.cols(), rng);
        mean.add_scaled(&z, cfg.temp * sched.betas[i].sqrt());
    }
    Ok(mean)
}

/// Full guided reverse chain from standard normal noise.
pub fn sample(
    model: &impl EpsilonModel,
    y: &Tensor2D,
    shape: (usize, usize),
    sched: &NoiseSchedule,
    cfg: &GuidanceConfig,
    rng: &mut impl Rng,
) -> Result<Tensor2D> {
    cfg.validate()?;
    let mut x = standard_normal(shape.0, shape.1, rng);
    for i in (0..sched.steps()).rev() {
        let eps = guided_epsilon(model, &x, y, i, cfg)?;
        x = denoise_step(&x, &eps, i, sched, cfg, rng)?;
    }
    x.ensure_finite("sampled sequence")?;
    Ok(x)
}
