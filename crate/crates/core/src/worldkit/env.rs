use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DT: f64 = 0.05;
pub const DEFAULT_GAMMA: f64 = 0.99;

pub const OSCILLATOR_STIFFNESS: f64 = 4.0;
pub const OSCILLATOR_DAMPING: f64 = 0.5;

const PENDULUM_GRAVITY: f64 = 10.0;
const PENDULUM_MAX_SPEED: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    PointMass2D,
    DampedOscillator,
    Pendulum,
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvKind::PointMass2D => "pointmass",
            EnvKind::DampedOscillator => "oscillator",
            EnvKind::Pendulum => "pendulum",
        })
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pointmass" | "pointmass2d" | "point_mass2_d" => Ok(EnvKind::PointMass2D),
            "oscillator" | "dampedoscillator" | "damped_oscillator" => Ok(EnvKind::DampedOscillator),
            "pendulum" => Ok(EnvKind::Pendulum),
            other => Err(Error::Config(format!("unknown environment `{other}`"))),
        }
    }
}

/// A deterministic control task. All state lives in the arguments.
///
/// | kind | state | action | reward |
/// |---|---|---|---|
/// | PointMass2D | `(px, py, vx, vy)` | force in `[-1, 1]²` | `-‖p'‖` |
/// | DampedOscillator | `(x, v)` | force in `[-1, 1]` | `-(x'² + 0.1·v'²)` |
/// | Pendulum | `(cos θ, sin θ, ω)` | torque in `[-2, 2]` | `-(θ² + 0.1·ω² + 0.001·u²)` |
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub kind: EnvKind,
    pub dt: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

fn wrap_angle(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t == -PI {
        PI
    } else {
        t
    }
}

impl Environment {
    pub fn new(kind: EnvKind) -> Self {
        Self {
            kind,
            dt: DT,
            gamma: DEFAULT_GAMMA,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self.kind {
            EnvKind::PointMass2D => 4,
            EnvKind::DampedOscillator => 2,
            EnvKind::Pendulum => 3,
        }
    }

    pub fn action_dim(&self) -> usize {
        match self.kind {
            EnvKind::PointMass2D => 2,
            EnvKind::DampedOscillator | EnvKind::Pendulum => 1,
        }
    }

    /// Symmetric bound applied to every action component.
    pub fn action_bound(&self) -> f64 {
        match self.kind {
            EnvKind::Pendulum => 2.0,
            _ => 1.0,
        }
    }

    pub fn clip_action(&self, action: &[f64]) -> Vec<f64> {
        let b = self.action_bound();
        action.iter().map(|a| a.clamp(-b, b)).collect()
    }

    pub fn initial_state(&self, rng: &mut impl Rng) -> Vec<f64> {
        match self.kind {
            EnvKind::PointMass2D => {
                let angle = rng.gen_range(-PI..PI);
                vec![angle.cos(), angle.sin(), 0.0, 0.0]
            }
            EnvKind::DampedOscillator => vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            EnvKind::Pendulum => {
                let theta: f64 = rng.gen_range(-PI..PI);
                vec![theta.cos(), theta.sin(), rng.gen_range(-1.0..1.0)]
            }
        }
    }

    fn check(&self, state: &[f64], action: &[f64]) -> Result<()> {
        if state.len() != self.state_dim() {
            return Err(Error::Shape(format!(
                "{} state has {} entries, got {}",
                self.kind,
                self.state_dim(),
                state.len()
            )));
        }
        if action.len() != self.action_dim() {
            return Err(Error::Shape(format!(
                "{} action has {} entries, got {}",
                self.kind,
                self.action_dim(),
                action.len()
            )));
        }
        if state.iter().chain(action).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{} state or action", self.kind)));
        }
        Ok(())
    }

    /// One semi-implicit Euler step. The action is clipped first.
    pub fn step(&self, state: &[f64], action: &[f64]) -> Result<Transition> {
        self.check(state, action)?;
        let a = self.clip_action(action);
        let dt = self.dt;
        let (next_state, reward) = match self.kind {
            EnvKind::PointMass2D => {
                let vx = state[2] + dt * a[0];
                let vy = state[3] + dt * a[1];
                let px = state[0] + dt * vx;
                let py = state[1] + dt * vy;
                (vec![px, py, vx, vy], -px.hypot(py))
            }
            EnvKind::DampedOscillator => {
                let (x, v) = (state[0], state[1]);
                let acc = -OSCILLATOR_STIFFNESS * x - OSCILLATOR_DAMPING * v + a[0];
                let v2 = v + dt * acc;
                let x2 = x + dt * v2;
                (vec![x2, v2], -(x2 * x2 + 0.1 * v2 * v2))
            }
            EnvKind::Pendulum => {
                let theta = state[1].atan2(state[0]);
                let w = state[2];
                let u = a[0];
                let reward = -(wrap_angle(theta).powi(2) + 0.1 * w * w + 0.001 * u * u);
                let w2 = (w + dt * (1.5 * PENDULUM_GRAVITY * theta.sin() + 3.0 * u))
                    .clamp(-PENDULUM_MAX_SPEED, PENDULUM_MAX_SPEED);
                let t2 = theta + dt * w2;
                (vec![t2.cos(), t2.sin(), w2], reward)
            }
        };
        if next_state.iter().any(|v| !v.is_finite()) || !reward.is_finite() {
            return Err(Error::NonFinite(format!("{} step produced a non-finite state", self.kind)));
        }
        Ok(Transition {
            next_state,
            reward,
            done: false,
        })
    }

    /// Proportional-derivative controller toward the goal, clipped to the
    /// action bounds. The pendulum pumps energy until it is near upright.
    pub fn expert_action(&self, state: &[f64]) -> Vec<f64> {
        let raw = match self.kind {
            EnvKind::PointMass2D => vec![
                -4.0 * state[0] - 4.0 * state[2],
                -4.0 * state[1] - 4.0 * state[3],
            ],
            EnvKind::DampedOscillator => vec![-2.0 * state[0] - 3.0 * state[1]],
            EnvKind::Pendulum => {
                let theta = wrap_angle(state[1].atan2(state[0]));
                let w = state[2];
                if state[0] > 0.85 {
                    vec![-(10.0 * theta + 2.0 * w)]
                } else {
                    let energy = 0.5 * w * w + 1.5 * PENDULUM_GRAVITY * theta.cos();
                    let target = 1.5 * PENDULUM_GRAVITY;
                    let dir = if w == 0.0 { 1.0 } else { w.signum() };
                    vec![if energy < target { 2.0 * dir } else { -0.5 * dir }]
                }
            }
        };
        self.clip_action(&raw)
    }

    /// Scalar used by the damping tests: `v² + k·x²` for the oscillator.
    pub fn oscillator_energy(state: &[f64]) -> f64 {
        state[1] * state[1] + OSCILLATOR_STIFFNESS * state[0] * state[0]
    }
}
