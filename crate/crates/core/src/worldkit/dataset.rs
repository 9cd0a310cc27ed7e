use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::env::{EnvKind, Environment};
use super::policy::{Policy, PolicySpec};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const REPLAY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub behavior_tag: String,
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    fn check_lengths(&self, env: &Environment) -> Result<()> {
        let t = self.actions.len();
        if t == 0 || self.states.len() != t + 1 || self.rewards.len() != t {
            return Err(Error::Length(format!(
                "episode has {} states, {} actions, {} rewards",
                self.states.len(),
                t,
                self.rewards.len()
            )));
        }
        if self.states.iter().any(|s| s.len() != env.state_dim())
            || self.actions.iter().any(|a| a.len() != env.action_dim())
        {
            return Err(Error::Shape("episode row width does not match the environment".into()));
        }
        Ok(())
    }
}

/// Runs `policy` for `horizon` steps from a fresh initial state.
pub fn rollout(
    env: &Environment,
    policy: &mut dyn Policy,
    horizon: usize,
    tag: &str,
    rng: &mut ChaCha8Rng,
) -> Result<Episode> {
    policy.reset();
    let mut state = env.initial_state(rng);
    let mut ep = Episode {
        behavior_tag: tag.to_string(),
        states: vec![state.clone()],
        actions: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
    };
    for _ in 0..horizon {
        let action = env.clip_action(&policy.act(env, &state, rng)?);
        let tr = env.step(&state, &action)?;
        state = tr.next_state;
        ep.states.push(state.clone());
        ep.actions.push(action);
        ep.rewards.push(tr.reward);
        if tr.done {
            break;
        }
    }
    Ok(ep)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub env: Environment,
    pub episodes: Vec<Episode>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    env: String,
    state_dim: usize,
    action_dim: usize,
    gamma: f64,
    action_bound: f64,
    dt: f64,
}

#[derive(Serialize, Deserialize)]
struct EpisodeLine {
    version: u32,
    env: String,
    #[serde(flatten)]
    episode: Episode,
}

/// Each episode draws from its own stream of the seeded generator, so the
/// result does not depend on scheduling.
pub fn generate_dataset(
    env: &Environment,
    spec: PolicySpec,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<Dataset> {
    if horizon < 2 {
        return Err(Error::Config(format!("horizon must be >= 2, got {horizon}")));
    }
    let tag = spec.to_string();
    let episodes = (0..episodes)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut policy = spec;
            rollout(env, &mut policy, horizon, &tag, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { env: *env, episodes })
}

/// Concatenation of several single-policy datasets, each with its own seed.
pub fn generate_mixture(
    env: &Environment,
    parts: &[(PolicySpec, usize)],
    horizon: usize,
    seed: u64,
) -> Result<Dataset> {
    let mut out = Dataset {
        env: *env,
        episodes: Vec::new(),
    };
    for (k, &(spec, n)) in parts.iter().enumerate() {
        let part = generate_dataset(env, spec, n, horizon, seed.wrapping_add(1_000_003 * k as u64))?;
        out.episodes.extend(part.episodes);
    }
    Ok(out)
}

pub fn checksum_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Dataset {
    pub fn transition_count(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }

    /// Largest gap between a recorded next state and its replay.
    pub fn replay_error(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for ep in &self.episodes {
            for (k, a) in ep.actions.iter().enumerate() {
                let tr = self.env.step(&ep.states[k], a)?;
                for (x, y) in tr.next_state.iter().zip(&ep.states[k + 1]) {
                    worst = worst.max((x - y).abs());
                }
                worst = worst.max((tr.reward - ep.rewards[k]).abs());
            }
        }
        Ok(worst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes.is_empty() {
            return Err(Error::Length("dataset has no episodes".into()));
        }
        for ep in &self.episodes {
            ep.check_lengths(&self.env)?;
        }
        let err = self.replay_error()?;
        if err > REPLAY_TOLERANCE {
            return Err(Error::OutOfRange(format!(
                "recorded transitions disagree with the dynamics by {err:e}"
            )));
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let header = Header {
            version: FORMAT_VERSION,
            env: self.env.kind.to_string(),
            state_dim: self.env.state_dim(),
            action_dim: self.env.action_dim(),
            gamma: self.env.gamma,
            action_bound: self.env.action_bound(),
            dt: self.env.dt,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for ep in &self.episodes {
            let line = EpisodeLine {
                version: FORMAT_VERSION,
                env: header.env.clone(),
                episode: ep.clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("episode serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty dataset file".into(),
        })?;
        let header: Header = serde_json::from_str(first).map_err(|e| Error::Parse {
            line: 1,
            message: format!("bad header: {e}"),
        })?;
        if header.version != FORMAT_VERSION {
            return Err(Error::Parse {
                line: 1,
                message: format!("unsupported version {}", header.version),
            });
        }
        let kind: EnvKind = header.env.parse().map_err(|e: Error| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        let mut env = Environment::new(kind);
        env.gamma = header.gamma;
        env.dt = header.dt;
        if header.state_dim != env.state_dim() || header.action_dim != env.action_dim() {
            return Err(Error::Parse {
                line: 1,
                message: "header dimensions do not match the environment".into(),
            });
        }
        if !(header.gamma > 0.0 && header.gamma <= 1.0) {
            return Err(Error::Parse {
                line: 1,
                message: format!("gamma {} outside (0, 1]", header.gamma),
            });
        }
        let mut episodes = Vec::new();
        for (idx, line) in lines {
            let parsed: EpisodeLine = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            if parsed.env != header.env {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("episode env `{}` differs from header", parsed.env),
                });
            }
            parsed.episode.check_lengths(&env).map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            episodes.push(parsed.episode);
        }
        let ds = Dataset { env, episodes };
        ds.validate()?;
        Ok(ds)
    }

    /// Writes the file and returns its checksum.
    pub fn write(&self, path: &Path) -> Result<String> {
        let text = self.to_jsonl();
        fs::write(path, text.as_bytes())?;
        Ok(checksum_bytes(text.as_bytes()))
    }

    pub fn read(path: &Path) -> Result<(Self, String)> {
        let bytes = fs::read(path)?;
        let text = String::from_utf8(bytes).map_err(|_| Error::Parse {
            line: 0,
            message: "dataset file is not UTF-8".into(),
        })?;
        let ds = Self::from_jsonl(&text)?;
        Ok((ds, checksum_bytes(text.as_bytes())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_and_replays() {
        let env = Environment::new(EnvKind::DampedOscillator);
        let a = generate_dataset(&env, PolicySpec::ScriptedNoisy(0.3), 5, 20, 7).unwrap();
        let b = generate_dataset(&env, PolicySpec::ScriptedNoisy(0.3), 5, 20, 7).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        assert_eq!(a.replay_error().unwrap(), 0.0);
        assert_eq!(a.transition_count(), 100);
        assert_ne!(a, generate_dataset(&env, PolicySpec::ScriptedNoisy(0.3), 5, 20, 8).unwrap());
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let env = Environment::new(EnvKind::Pendulum);
        let a = generate_dataset(&env, PolicySpec::Random, 3, 10, 1).unwrap();
        let text = a.to_jsonl();
        assert_eq!(text.lines().count(), 4);
        let b = Dataset::from_jsonl(&text).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.to_jsonl(), text);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let env = Environment::new(EnvKind::PointMass2D);
        let text = generate_dataset(&env, PolicySpec::Random, 2, 4, 1).unwrap().to_jsonl();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[2] = "{not json";
        match Dataset::from_jsonl(&lines.join("\n")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tampered_transition_fails_replay() {
        let env = Environment::new(EnvKind::PointMass2D);
        let mut ds = generate_dataset(&env, PolicySpec::ScriptedExpert, 1, 5, 2).unwrap();
        ds.episodes[0].states[3][0] += 1e-6;
        assert!(ds.validate().is_err());
    }

    #[test]
    fn short_horizon_rejected() {
        let env = Environment::new(EnvKind::PointMass2D);
        assert!(generate_dataset(&env, PolicySpec::Random, 1, 1, 0).is_err());
    }
}
