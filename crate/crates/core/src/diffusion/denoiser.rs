//! Noise-prediction network: a residual stack of same-length temporal
//! convolutions, modulated per block by an embedding of the diffusion step
//! and the condition vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Bound, Conv1d, FfnParams, Linear, ParamId, ParameterSet, Tape, Tensor2D, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub state_dim: usize,
    pub cond_dim: usize,
    pub channels: usize,
    pub blocks: usize,
    pub time_dim: usize,
    pub kernel: usize,
}

impl DenoiserConfig {
    pub fn new(state_dim: usize, cond_dim: usize) -> Self {
        Self {
            state_dim,
            cond_dim,
            channels: 64,
            blocks: 4,
            time_dim: 32,
            kernel: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Block {
    conv1: Conv1d,
    conv2: Conv1d,
    modulation: Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Denoiser {
    pub config: DenoiserConfig,
    pub params: ParameterSet,
    input: Conv1d,
    embed: FfnParams,
    blocks: Vec<Block>,
    output: Linear,
    null: ParamId,
}

/// Sinusoidal embedding of a diffusion step, 1×`dim`.
pub fn timestep_embedding(step: usize, dim: usize) -> Tensor2D {
    let half = dim / 2;
    let mut out = Tensor2D::zeros(1, dim);
    for k in 0..half {
        let freq = (-(10_000f64.ln()) * k as f64 / half.max(1) as f64).exp();
        let (s, c) = (step as f64 * freq).sin_cos();
        out.set(0, k, s);
        out.set(0, half + k, c);
    }
    out
}

impl Denoiser {
    pub fn new(config: DenoiserConfig, rng: &mut impl Rng) -> Self {
        let mut ps = ParameterSet::new();
        let ch = config.channels;
        let input = Conv1d::new(&mut ps, "input", config.state_dim, ch, config.kernel, rng);
        let embed = FfnParams::new(
            &mut ps,
            "embed",
            config.time_dim + config.cond_dim,
            ch,
            ch,
            rng,
        );
        let blocks = (0..config.blocks)
            .map(|b| Block {
                conv1: Conv1d::new(&mut ps, &format!("block{b}.conv1"), ch, ch, config.kernel, rng),
                modulation: Linear::new(&mut ps, &format!("block{b}.modulation"), ch, ch, rng),
                conv2: Conv1d::new(&mut ps, &format!("block{b}.conv2"), ch, ch, config.kernel, rng),
            })
            .collect();
        let output = Linear::new(&mut ps, "output", ch, config.state_dim, rng);
        let null = ps.add(
            "null_embedding",
            Tensor2D::from_fn(1, config.cond_dim, |_, _| rng.gen_range(-0.1..0.1)),
        );
        Self {
            config,
            params: ps,
            input,
            embed,
            blocks,
            output,
            null,
        }
    }

    /// Parameter holding the learned stand-in for "no condition".
    pub fn null_id(&self) -> ParamId {
        self.null
    }

    /// Every parameter that the condition vector passes through before it
    /// reaches the convolution stack.
    pub fn condition_projection_ids(&self) -> [ParamId; 4] {
        self.embed.ids()
    }

    /// Noise prediction with the shape of `x`.
    pub fn forward(
        &self,
        tape: &mut Tape<'_>,
        p: &Bound,
        x: Var,
        cond: Var,
        step: usize,
    ) -> Result<Var> {
        let (rows, cols) = tape.shape(x);
        if cols != self.config.state_dim {
            return Err(Error::Shape(format!(
                "denoiser expects {} state columns, got {cols}",
                self.config.state_dim
            )));
        }
        if rows == 0 {
            return Err(Error::Length("denoiser input has no rows".into()));
        }
        if tape.shape(cond) != (1, self.config.cond_dim) {
            return Err(Error::Shape(format!(
                "condition must be 1x{}, got {:?}",
                self.config.cond_dim,
                tape.shape(cond)
            )));
        }
        let t = tape.constant(timestep_embedding(step, self.config.time_dim));
        let tc = tape.concat_cols(&[t, cond])?;
        let e = crate::numerics::ffn_apply(tape, p, &self.embed, tc)?;

        let mut h = self.input.forward(tape, p, x)?;
        for b in &self.blocks {
            let z = tape.relu(h);
            let z = b.conv1.forward(tape, p, z)?;
            let m = b.modulation.forward(tape, p, e)?;
            let z = tape.add_row(z, m)?;
            let z = tape.relu(z);
            let z = b.conv2.forward(tape, p, z)?;
            h = tape.add(h, z)?;
        }
        let h = tape.relu(h);
        self.output.forward(tape, p, h)
    }

    /// Evaluates the network outside of training. `cond = None` uses the
    /// null embedding.
    pub fn predict(&self, x: &Tensor2D, cond: Option<&Tensor2D>, step: usize) -> Result<Tensor2D> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let xv = tape.constant(x.clone());
        let c = match cond {
            Some(y) => tape.constant(y.clone()),
            None => bound.var(self.null),
        };
        let out = self.forward(&mut tape, &bound, xv, c, step)?;
        Ok(tape.value(out).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> Denoiser {
        let mut cfg = DenoiserConfig::new(3, 5);
        cfg.channels = 8;
        cfg.blocks = 2;
        cfg.time_dim = 6;
        Denoiser::new(cfg, &mut ChaCha8Rng::seed_from_u64(9))
    }

    #[test]
    fn shape_preserving() {
        let d = tiny();
        for rows in [1, 7, 48] {
            let x = Tensor2D::from_fn(rows, 3, |i, j| (i + j) as f64 * 0.1);
            let y = d.predict(&x, None, 3).unwrap();
            assert_eq!(y.shape(), (rows, 3));
        }
    }

    #[test]
    fn condition_and_step_matter() {
        let d = tiny();
        let x = Tensor2D::from_fn(6, 3, |i, j| ((i * 3 + j) as f64).sin());
        let y = Tensor2D::row_vector(&[1.0, -1.0, 0.5, 0.0, 2.0]);
        let a = d.predict(&x, None, 2).unwrap();
        let b = d.predict(&x, Some(&y), 2).unwrap();
        let c = d.predict(&x, Some(&y), 3).unwrap();
        assert!(a.max_abs_diff(&b) > 1e-6);
        assert!(b.max_abs_diff(&c) > 1e-6);
        assert_eq!(b, d.predict(&x, Some(&y), 2).unwrap());
    }

    #[test]
    fn rejects_wrong_widths() {
        let d = tiny();
        assert!(d.predict(&Tensor2D::zeros(4, 2), None, 0).is_err());
        assert!(d.predict(&Tensor2D::zeros(4, 3), Some(&Tensor2D::zeros(1, 4)), 0).is_err());
    }

    #[test]
    fn embedding_is_deterministic_and_bounded() {
        let e = timestep_embedding(17, 32);
        assert_eq!(e, timestep_embedding(17, 32));
        assert!(e.max_abs() <= 1.0);
        assert_eq!(timestep_embedding(0, 4).data(), &[0.0, 0.0, 1.0, 1.0]);
    }
}
