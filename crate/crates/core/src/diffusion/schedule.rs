use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::Tensor2D;

pub const DEFAULT_STEPS: usize = 100;
pub const BETA_START: f64 = 1e-4;
pub const BETA_END: f64 = 2e-2;

/// Forward-process coefficients.
///
/// Arrays are indexed by network step `i in 0..N`; `alpha_bars[i]` is the
/// product of `alphas[0..=i]`, so the noisiest level is `N - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::Config("noise schedule needs at least one step".into()));
        }
        if betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::Config("betas must lie in (0, 1)".into()));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let alpha_bars = alphas
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
        })
    }

    /// Linearly spaced betas from `start` to `end`.
    pub fn linear(steps: usize, start: f64, end: f64) -> Result<Self> {
        let betas = match steps {
            0 => Vec::new(),
            1 => vec![start],
            _ => (0..steps)
                .map(|i| start + (end - start) * i as f64 / (steps - 1) as f64)
                .collect(),
        };
        Self::from_betas(betas)
    }

    pub fn default_linear(steps: usize) -> Result<Self> {
        Self::linear(steps, BETA_START, BETA_END)
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    fn check_step(&self, i: usize) -> Result<()> {
        if i >= self.steps() {
            return Err(Error::OutOfRange(format!(
                "diffusion step {i} outside 0..{}",
                self.steps()
            )));
        }
        Ok(())
    }
}

/// `x_i = √ᾱ_i·x0 + √(1−ᾱ_i)·eps`
pub fn forward_noise(
    x0: &Tensor2D,
    i: usize,
    eps: &Tensor2D,
    sched: &NoiseSchedule,
) -> Result<Tensor2D> {
    sched.check_step(i)?;
    let ab = sched.alpha_bars[i];
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    x0.zip_map(eps, |x, e| a * x + b * e)
}

pub fn standard_normal(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor2D {
    Tensor2D::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}
