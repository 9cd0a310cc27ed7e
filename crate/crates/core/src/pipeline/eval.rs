use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bundle::TrainedBundle;
use super::config::{AblationMode, TrainConfig};
use super::plan::Planner;
use super::train::{train, FrequencyShiftLog};
use crate::error::{Error, Result};
use crate::worldkit::{discounted_return, rollout as run_episode, Dataset, Environment, Policy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutStats {
    pub returns: Vec<f64>,
    pub discounted: Vec<f64>,
}

impl RolloutStats {
    pub fn mean_return(&self) -> f64 {
        if self.returns.is_empty() {
            return 0.0;
        }
        self.returns.iter().sum::<f64>() / self.returns.len() as f64
    }
}

/// Mean and standard error (sample deviation over `√n`).
pub fn mean_stderr(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::Length(format!(
            "standard error needs at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Runs `episodes` closed-loop episodes of any policy. Episode `k` uses
/// stream `k` of the seeded generator.
pub fn rollout_policy(
    policy: &mut dyn Policy,
    env: &Environment,
    episodes: usize,
    max_steps: usize,
    seed: u64,
) -> Result<RolloutStats> {
    let mut stats = RolloutStats {
        returns: Vec::with_capacity(episodes),
        discounted: Vec::with_capacity(episodes),
    };
    for k in 0..episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let ep = run_episode(env, policy, max_steps, "eval", &mut rng)?;
        stats.returns.push(ep.total_reward());
        stats.discounted.push(if ep.is_empty() {
            0.0
        } else {
            discounted_return(&ep.rewards, env.gamma)?
        });
    }
    Ok(stats)
}

/// Closed-loop planner rollouts.
pub fn rollout(
    bundle: &TrainedBundle,
    env: &Environment,
    episodes: usize,
    max_steps: usize,
    seed: u64,
) -> Result<RolloutStats> {
    let mut planner = Planner::new(bundle);
    rollout_policy(&mut planner, env, episodes, max_steps, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seeds: Vec<u64>,
    pub per_seed_mean: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
    pub per_seed: Vec<RolloutStats>,
}

impl EvalReport {
    pub fn from_per_seed(seeds: Vec<u64>, per_seed: Vec<RolloutStats>) -> Result<Self> {
        let per_seed_mean: Vec<f64> = per_seed.iter().map(RolloutStats::mean_return).collect();
        let (mean, stderr) = mean_stderr(&per_seed_mean)?;
        Ok(Self {
            seeds,
            per_seed_mean,
            mean,
            stderr,
            per_seed,
        })
    }
}

/// Seed list used by evaluation: `base, base + 1, ...`.
pub fn seed_list(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|k| base.wrapping_add(k)).collect()
}

/// Evaluates any policy factory over several seeds in parallel.
pub fn evaluate_policy<P, F>(
    make: F,
    env: &Environment,
    seeds: &[u64],
    episodes: usize,
    max_steps: usize,
) -> Result<EvalReport>
where
    P: Policy,
    F: Fn() -> P + Sync,
{
    if seeds.len() < 2 {
        return Err(Error::Config(format!("evaluation needs >= 2 seeds, got {}", seeds.len())));
    }
    let per_seed = seeds
        .par_iter()
        .map(|&s| rollout_policy(&mut make(), env, episodes, max_steps, s))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_per_seed(seeds.to_vec(), per_seed)
}

pub fn evaluate(
    bundle: &TrainedBundle,
    env: &Environment,
    seeds: &[u64],
    episodes: usize,
    max_steps: usize,
) -> Result<EvalReport> {
    evaluate_policy(|| Planner::new(bundle), env, seeds, episodes, max_steps)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub mode: AblationMode,
    pub dataset_checksum: String,
    pub eval: EvalReport,
    pub log: FrequencyShiftLog,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

/// Trains and evaluates every mode with one shared seed list.
pub fn ablation_suite(
    dataset: &Dataset,
    dataset_checksum: &str,
    cfg: &TrainConfig,
) -> Result<AblationReport> {
    cfg.validate()?;
    let seeds = seed_list(cfg.seed, cfg.eval_seeds);
    let mut rows = Vec::with_capacity(AblationMode::ALL.len());
    for mode in AblationMode::ALL {
        let mut c = cfg.clone();
        c.mode = mode;
        let out = train(dataset, &c)?;
        let eval = evaluate(&out.bundle, &dataset.env, &seeds, c.eval_episodes, c.eval_max_steps)?;
        rows.push(AblationRow {
            mode,
            dataset_checksum: dataset_checksum.to_string(),
            eval,
            log: out.log,
        });
    }
    Ok(AblationReport { rows })
}
