use rand_chacha::ChaCha8Rng;

use super::bundle::{Generator, TrainedBundle};
use super::window::HistoryQueue;
use crate::diffusion::{
    guided_epsilon, posterior_mean, standard_normal, Denoiser, EpsilonModel, GuidanceConfig,
};
use crate::error::{Error, Result};
use crate::numerics::Tensor2D;
use crate::spectral::{dwt, idwt, SubTrajectoryPair, WaveletFilterPair};
use crate::worldkit::{Environment, Policy};

/// Requested return at inference time.
pub const TARGET_RETURN: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct PlanOutput {
    pub action: Vec<f64>,
    /// Generated trajectory in state units, `H × d_s`.
    pub plan: Tensor2D,
}

/// Condition for one band, or `None` for the null embedding.
fn band_condition(pooled: &Tensor2D, enabled: bool) -> Result<Option<Tensor2D>> {
    if !enabled {
        return Ok(None);
    }
    Ok(Some(Tensor2D::hstack(&[pooled, &Tensor2D::row_vector(&[TARGET_RETURN])])?))
}

fn band_epsilon(
    model: &Denoiser,
    x: &Tensor2D,
    y: Option<&Tensor2D>,
    step: usize,
    cfg: &GuidanceConfig,
) -> Result<Tensor2D> {
    match y {
        Some(y) => guided_epsilon(model, x, y, step, cfg),
        None => model.epsilon(x, None, step),
    }
}

fn update(
    x: &Tensor2D,
    eps: &Tensor2D,
    step: usize,
    bundle: &TrainedBundle,
    cfg: &GuidanceConfig,
) -> Result<Tensor2D> {
    if cfg.literal_update {
        x.zip_map(eps, |a, b| a - b)
    } else {
        posterior_mean(x, eps, step, &bundle.schedule)
    }
}

fn add_noise(x: &mut Tensor2D, step: usize, bundle: &TrainedBundle, cfg: &GuidanceConfig, rng: &mut ChaCha8Rng) {
    if step > 0 && cfg.temp > 0.0 && !cfg.literal_update {
        let z = standard_normal(x.rows(), x.cols(), rng);
        x.add_scaled(&z, cfg.temp * bundle.schedule.betas[step].sqrt());
    }
}

fn clamp_pair(
    low: Tensor2D,
    high: Tensor2D,
    first: &[f64],
    filter: &WaveletFilterPair,
) -> Result<(Tensor2D, Tensor2D)> {
    let mut tau = idwt(&SubTrajectoryPair::new(low, high)?, filter)?;
    tau.row_mut(0).copy_from_slice(first);
    let p = dwt(&tau, filter)?;
    Ok((p.low, p.high))
}

/// One pass of the closed-loop planner: read the history, generate a plan
/// that starts at the latest state, and invert its first transition.
pub fn plan_step(bundle: &TrainedBundle, queue: &HistoryQueue, rng: &mut ChaCha8Rng) -> Result<PlanOutput> {
    if !bundle.trained {
        return Err(Error::Config("bundle has not been trained".into()));
    }
    let cfg = &bundle.config;
    let gcfg = cfg.guidance();
    let history = bundle.states.apply(&queue.padded()?);
    let current = history.row(history.rows() - 1).to_vec();
    let d = current.len();
    if d != bundle.env.state_dim() {
        return Err(Error::Shape(format!(
            "history width {d} does not match the environment ({})",
            bundle.env.state_dim()
        )));
    }
    let h = cfg.horizon;
    let steps = bundle.schedule.steps();

    let tau = match &bundle.generator {
        Generator::Wavelet { cffc, lfd, hfd } => {
            let filter = cfg.filter();
            let mode = cfg.mode;
            let (y_low, y_high) = if mode.uses_low_condition() || mode.uses_high_condition() {
                let c = cffc.apply(&dwt(&history, &filter)?)?;
                (
                    band_condition(&c.pooled_low, mode.uses_low_condition())?,
                    band_condition(&c.pooled_high, mode.uses_high_condition())?,
                )
            } else {
                (None, None)
            };
            let mut low = standard_normal(h / 2, d, rng);
            let mut high = standard_normal(h / 2, d, rng);
            for i in (0..steps).rev() {
                let e_low = band_epsilon(lfd, &low, y_low.as_ref(), i, &gcfg)?;
                let e_high = band_epsilon(hfd, &high, y_high.as_ref(), i, &gcfg)?;
                let mut m_low = update(&low, &e_low, i, bundle, &gcfg)?;
                let mut m_high = update(&high, &e_high, i, bundle, &gcfg)?;
                if cfg.clamp {
                    (m_low, m_high) = clamp_pair(m_low, m_high, &current, &filter)?;
                }
                add_noise(&mut m_low, i, bundle, &gcfg, rng);
                add_noise(&mut m_high, i, bundle, &gcfg, rng);
                low = m_low;
                high = m_high;
            }
            idwt(&SubTrajectoryPair::new(low, high)?, &filter)?
        }
        Generator::TimeDomain { denoiser } => {
            let y = Tensor2D::row_vector(&[TARGET_RETURN]);
            let mut x = standard_normal(h, d, rng);
            for i in (0..steps).rev() {
                let e = guided_epsilon(denoiser, &x, &y, i, &gcfg)?;
                let mut m = update(&x, &e, i, bundle, &gcfg)?;
                if cfg.clamp {
                    m.row_mut(0).copy_from_slice(&current);
                }
                add_noise(&mut m, i, bundle, &gcfg, rng);
                x = m;
            }
            x
        }
    };
    tau.ensure_finite("generated plan")?;
    let plan = bundle.states.invert(&tau);
    let action = bundle.inverse.predict_action(plan.row(0), plan.row(1))?;
    Ok(PlanOutput { action, plan })
}

/// Replans at every step from the states it has observed.
pub struct Planner<'b> {
    pub bundle: &'b TrainedBundle,
    pub queue: HistoryQueue,
}

impl<'b> Planner<'b> {
    pub fn new(bundle: &'b TrainedBundle) -> Self {
        Self {
            bundle,
            queue: HistoryQueue::new(bundle.config.history),
        }
    }
}

impl Policy for Planner<'_> {
    fn act(&mut self, env: &Environment, state: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        if env.kind != self.bundle.env.kind {
            return Err(Error::Config(format!(
                "bundle trained on {}, asked to act in {}",
                self.bundle.env.kind, env.kind
            )));
        }
        self.queue.push(state.to_vec());
        Ok(plan_step(self.bundle, &self.queue, rng)?.action)
    }

    fn reset(&mut self) {
        self.queue.clear();
    }
}
