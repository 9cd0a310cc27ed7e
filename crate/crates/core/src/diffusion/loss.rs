use rand::Rng;

use super::denoiser::Denoiser;
use super::schedule::{forward_noise, standard_normal, NoiseSchedule};
use crate::error::{Error, Result};
use crate::numerics::{Bound, Tape, Tensor2D, Var};

pub const DEFAULT_P_NULL: f64 = 0.25;

/// Differentiable noise predictor, as used during training.
pub trait TapeEpsilonModel {
    fn forward(&self, tape: &mut Tape<'_>, p: &Bound, x: Var, cond: Var, step: usize) -> Result<Var>;
    fn null_condition(&self, p: &Bound) -> Var;
}

impl TapeEpsilonModel for Denoiser {
    fn forward(&self, tape: &mut Tape<'_>, p: &Bound, x: Var, cond: Var, step: usize) -> Result<Var> {
        Denoiser::forward(self, tape, p, x, cond, step)
    }

    fn null_condition(&self, p: &Bound) -> Var {
        p.var(self.null_id())
    }
}

#[derive(Clone, Debug)]
pub struct TrainingItem<'x> {
    pub x0: &'x Tensor2D,
    pub cond: Var,
}

#[derive(Clone, Debug)]
pub struct LossOutput {
    pub loss: Var,
    pub residuals: Vec<Tensor2D>,
    pub steps: Vec<usize>,
    pub dropped: Vec<bool>,
}

/// Mean over the batch of the ε-prediction MSE.
pub fn training_loss(
    tape: &mut Tape<'_>,
    p: &Bound,
    model: &impl TapeEpsilonModel,
    batch: &[TrainingItem<'_>],
    sched: &NoiseSchedule,
    p_null: f64,
    rng: &mut impl Rng,
) -> Result<LossOutput> {
    if batch.is_empty() {
        return Err(Error::Length("training batch is empty".into()));
    }
    if !(0.0..=1.0).contains(&p_null) {
        return Err(Error::Config(format!("p_null must lie in [0, 1], got {p_null}")));
    }
    let mut total: Option<Var> = None;
    let mut residuals = Vec::with_capacity(batch.len());
    let mut steps = Vec::with_capacity(batch.len());
    let mut dropped = Vec::with_capacity(batch.len());
    for item in batch {
        let step = rng.gen_range(0..sched.steps());
        let eps = standard_normal(item.x0.rows(), item.x0.cols(), rng);
        let drop = rng.gen_bool(p_null);
        let noisy = forward_noise(item.x0, step, &eps, sched)?;
        let cond = if drop { model.null_condition(p) } else { item.cond };
        let x = tape.constant(noisy);
        let pred = model.forward(tape, p, x, cond, step)?;
        residuals.push(tape.value(pred).zip_map(&eps, |a, b| a - b)?);
        let target = tape.constant(eps);
        let mse = tape.mse(pred, target)?;
        total = Some(match total {
            Some(t) => tape.add(t, mse)?,
            None => mse,
        });
        steps.push(step);
        dropped.push(drop);
    }
    let total = total.expect("batch is nonempty");
    Ok(LossOutput {
        loss: tape.scale(total, 1.0 / batch.len() as f64),
        residuals,
        steps,
        dropped,
    })
}
