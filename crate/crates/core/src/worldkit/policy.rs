use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::env::Environment;
use crate::error::{Error, Result};

/// Behaviour policies used to fill offline datasets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PolicySpec {
    Random,
    ScriptedNoisy(f64),
    ScriptedExpert,
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Random => f.write_str("random"),
            PolicySpec::ScriptedNoisy(s) => write!(f, "noisy:{s}"),
            PolicySpec::ScriptedExpert => f.write_str("expert"),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = Error;

    /// Accepts `random`, `expert` and `noisy:<sigma>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "random" => return Ok(PolicySpec::Random),
            "expert" => return Ok(PolicySpec::ScriptedExpert),
            _ => {}
        }
        if let Some(sigma) = s.strip_prefix("noisy:") {
            let sigma: f64 = sigma
                .parse()
                .map_err(|_| Error::Config(format!("bad noise level in `{s}`")))?;
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(Error::Config(format!("noise level must be >= 0 in `{s}`")));
            }
            return Ok(PolicySpec::ScriptedNoisy(sigma));
        }
        Err(Error::Config(format!(
            "unknown policy `{s}` (expected random, expert or noisy:<sigma>)"
        )))
    }
}

/// Anything that can act in an environment.
pub trait Policy {
    fn act(&mut self, env: &Environment, state: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>>;

    /// Called before every episode.
    fn reset(&mut self) {}
}

impl Policy for PolicySpec {
    fn act(&mut self, env: &Environment, state: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let b = env.action_bound();
        Ok(match *self {
            PolicySpec::Random => (0..env.action_dim()).map(|_| rng.gen_range(-b..=b)).collect(),
            PolicySpec::ScriptedExpert => env.expert_action(state),
            PolicySpec::ScriptedNoisy(sigma) => {
                let mut a = env.expert_action(state);
                if sigma > 0.0 {
                    let noise = Normal::new(0.0, sigma).expect("sigma checked");
                    for v in &mut a {
                        *v += noise.sample(rng);
                    }
                }
                env.clip_action(&a)
            }
        })
    }
}
