use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::env::Environment;
use crate::error::{Error, Result};
use crate::numerics::{ffn_apply, Adam, FfnParams, ParameterSet, Tape, Tensor2D, DEFAULT_HIDDEN};

/// Per-column affine standardisation. Columns with no spread keep unit scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &Tensor2D) -> Result<Self> {
        if rows.rows() == 0 {
            return Err(Error::Length("cannot standardise zero rows".into()));
        }
        let n = rows.rows() as f64;
        let mean = rows.mean_rows().into_vec();
        let std = (0..rows.cols())
            .map(|c| {
                let var = rows.column(c).iter().map(|v| (v - mean[c]).powi(2)).sum::<f64>() / n;
                if var > 1e-24 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, rows: &Tensor2D) -> Tensor2D {
        Tensor2D::from_fn(rows.rows(), rows.cols(), |r, c| {
            (rows.get(r, c) - self.mean[c]) / self.std[c]
        })
    }

    pub fn invert(&self, rows: &Tensor2D) -> Tensor2D {
        Tensor2D::from_fn(rows.rows(), rows.cols(), |r, c| rows.get(r, c) * self.std[c] + self.mean[c])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseDynamicsConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for InverseDynamicsConfig {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN,
            epochs: 200,
            batch_size: 256,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// `a = f(s, s')`, a two-layer network over the standardised pair
/// `(s, s' − s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InverseDynamics {
    pub env: Environment,
    pub params: ParameterSet,
    pub ffn: FfnParams,
    pub inputs: Standardizer,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseDynamicsReport {
    pub train_mse: f64,
    pub validation_mse: f64,
    pub train_transitions: usize,
    pub validation_transitions: usize,
}

fn pair_features(s: &[f64], s_next: &[f64]) -> Vec<f64> {
    s.iter()
        .copied()
        .chain(s_next.iter().zip(s).map(|(b, a)| b - a))
        .collect()
}

impl InverseDynamics {
    /// Untrained model with identity input scaling.
    pub fn new(env: &Environment, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let width = 2 * env.state_dim();
        let mut params = ParameterSet::new();
        let ffn = FfnParams::new(&mut params, "inverse", width, hidden, env.action_dim(), rng);
        Self {
            env: *env,
            params,
            ffn,
            inputs: Standardizer {
                mean: vec![0.0; width],
                std: vec![1.0; width],
            },
        }
    }

    fn features(&self, pairs: &[(&[f64], &[f64])]) -> Result<Tensor2D> {
        let d = self.env.state_dim();
        let rows = pairs
            .iter()
            .map(|(s, n)| {
                if s.len() != d || n.len() != d {
                    return Err(Error::Shape(format!("state pair must have width {d}")));
                }
                Ok(pair_features(s, n))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.inputs.apply(&Tensor2D::from_rows(&rows)?))
    }

    fn forward_raw(&self, x: &Tensor2D) -> Result<Tensor2D> {
        let mut tape = Tape::new();
        let b = self.params.bind(&mut tape);
        let xv = tape.constant(x.clone());
        let y = ffn_apply(&mut tape, &b, &self.ffn, xv)?;
        Ok(tape.value(y).clone())
    }

    /// Network output clipped to the action bounds.
    pub fn predict_action(&self, s: &[f64], s_next: &[f64]) -> Result<Vec<f64>> {
        let x = self.features(&[(s, s_next)])?;
        let y = self.forward_raw(&x)?;
        y.ensure_finite("predicted action")?;
        Ok(self.env.clip_action(y.row(0)))
    }

    /// Unclipped mean squared error over a set of transitions.
    pub fn mse(&self, pairs: &[(&[f64], &[f64])], actions: &[&[f64]]) -> Result<f64> {
        let x = self.features(pairs)?;
        let y = self.forward_raw(&x)?;
        let t = Tensor2D::from_rows(actions)?;
        Ok(y.zip_map(&t, |a, b| (a - b).powi(2))?.mean())
    }
}

type TransitionRef<'d> = (&'d [f64], &'d [f64], &'d [f64]);

fn transitions(ds: &Dataset) -> Vec<TransitionRef<'_>> {
    ds.episodes
        .iter()
        .flat_map(|ep| {
            (0..ep.len()).map(move |k| {
                (
                    ep.states[k].as_slice(),
                    ep.states[k + 1].as_slice(),
                    ep.actions[k].as_slice(),
                )
            })
        })
        .collect()
}

fn split_mse(model: &InverseDynamics, set: &[TransitionRef<'_>]) -> Result<f64> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let pairs: Vec<_> = set.iter().map(|t| (t.0, t.1)).collect();
    let acts: Vec<_> = set.iter().map(|t| t.2).collect();
    model.mse(&pairs, &acts)
}

/// Fits the model on a shuffled 90/10 split of every recorded transition.
pub fn train_inverse_dynamics(
    dataset: &Dataset,
    cfg: &InverseDynamicsConfig,
) -> Result<(InverseDynamics, InverseDynamicsReport)> {
    let mut all = transitions(dataset);
    if all.len() < 2 {
        return Err(Error::Length(format!(
            "inverse dynamics needs at least 2 transitions, got {}",
            all.len()
        )));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    all.shuffle(&mut rng);
    let n_val = (all.len() / 10).max(1);
    let (val, train) = all.split_at(n_val);

    let mut model = InverseDynamics::new(&dataset.env, cfg.hidden, &mut rng);
    let raw = Tensor2D::from_rows(
        &train
            .iter()
            .map(|t| pair_features(t.0, t.1))
            .collect::<Vec<_>>(),
    )?;
    model.inputs = Standardizer::fit(&raw)?;
    let x_all = model.inputs.apply(&raw);
    let y_all = Tensor2D::from_rows(&train.iter().map(|t| t.2).collect::<Vec<_>>())?;

    let adam = Adam::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let x = Tensor2D::from_rows(&chunk.iter().map(|&i| x_all.row(i)).collect::<Vec<_>>())?;
            let y = Tensor2D::from_rows(&chunk.iter().map(|&i| y_all.row(i)).collect::<Vec<_>>())?;
            let grads = {
                let mut tape = Tape::new();
                let b = model.params.bind(&mut tape);
                let xv = tape.constant(x);
                let yv = tape.constant(y);
                let pred = ffn_apply(&mut tape, &b, &model.ffn, xv)?;
                let loss = tape.mse(pred, yv)?;
                (tape.backward(loss), b)
            };
            model.params.accumulate(&grads.1, &grads.0);
            adam.step(&mut model.params)?;
        }
    }
    let report = InverseDynamicsReport {
        train_mse: split_mse(&model, train)?,
        validation_mse: split_mse(&model, val)?,
        train_transitions: train.len(),
        validation_transitions: val.len(),
    };
    Ok((model, report))
}
