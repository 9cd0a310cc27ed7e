use super::params::ParameterSet;
use crate::error::Result;

/// Learning rate used when nothing else is configured.
pub const DEFAULT_LEARNING_RATE: f64 = 2e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self::new(DEFAULT_LEARNING_RATE)
    }
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected update of every parameter; clears gradients.
    ///
    /// Nothing is modified if any gradient is non-finite.
    pub fn step(&self, ps: &mut ParameterSet) -> Result<()> {
        ps.check_grads()?;
        ps.step += 1;
        let t = ps.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for slot in &mut ps.slots {
            let n = slot.value.len();
            let (value, grad) = (slot.value.data_mut(), slot.grad.data_mut());
            let m = slot.first_moment.data_mut();
            let v = slot.second_moment.data_mut();
            for i in 0..n {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                value[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                grad[i] = 0.0;
            }
        }
        Ok(())
    }
}

pub fn adam_step(ps: &mut ParameterSet, lr: f64) -> Result<()> {
    Adam::new(lr).step(ps)
}
