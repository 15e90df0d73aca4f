//! Desk-scale continuous-control tasks with masked observations.
//!
//! * `po-integrator`: state `(x, v)`, `ẍ = u`, reward `−(x² + 0.1 v²)`.
//! * `po-pendulum`: state `(θ, ω)`, `θ̈ = −10 sin θ + u`,
//!   reward `−(θ² + 0.1 ω² + 0.001 u²)`.
//!
//! Both step by explicit Euler with `dt = 0.05`, truncate at 200 steps, clip
//! actions to `[−1, 1]`, and by default observe only the position. Rewards
//! are evaluated at the pre-step state. Reset draws each state component from
//! `uniform(−0.5, 0.5)` using a ChaCha8 generator seeded with the reset seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const ENV_NAMES: [&str; 3] = ["po-integrator", "po-pendulum", "chain-pomdp"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dynamics {
    Integrator,
    Pendulum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub name: String,
    pub state_dim: usize,
    pub action_dim: usize,
    /// Observed state indices; row `i` of the mask matrix is one-hot at `mask[i]`.
    pub mask: Vec<usize>,
    pub dt: f64,
    pub horizon: usize,
    pub action_bound: f64,
}

impl EnvSpec {
    pub fn obs_dim(&self) -> usize {
        self.mask.len()
    }

    /// `[obs_dim × state_dim]` binary selection matrix.
    pub fn mask_matrix(&self) -> Vec<Vec<f64>> {
        self.mask
            .iter()
            .map(|&j| (0..self.state_dim).map(|k| if k == j { 1.0 } else { 0.0 }).collect())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// `mask · state`.
pub fn mask_observe(state: &[f64], mask: &[usize]) -> Vec<f64> {
    mask.iter().map(|&i| state[i]).collect()
}

#[derive(Clone, Debug)]
pub struct Env {
    spec: EnvSpec,
    dynamics: Dynamics,
    state: Vec<f64>,
    t: usize,
    done: bool,
}

impl Env {
    pub fn new(dynamics: Dynamics, mask: Option<Vec<usize>>) -> Result<Self> {
        let name = match dynamics {
            Dynamics::Integrator => "po-integrator",
            Dynamics::Pendulum => "po-pendulum",
        };
        let mask = mask.unwrap_or_else(|| vec![0]);
        if mask.is_empty() || mask.len() > 2 || mask.iter().any(|&i| i >= 2) {
            return Err(Error::Config(format!("mask {mask:?} must list 1 or 2 state indices below 2")));
        }
        Ok(Self {
            spec: EnvSpec {
                name: name.into(),
                state_dim: 2,
                action_dim: 1,
                mask,
                dt: 0.05,
                horizon: 200,
                action_bound: 1.0,
            },
            dynamics,
            state: vec![0.0; 2],
            t: 0,
            done: true,
        })
    }

    /// Builds a continuous task by name.
    pub fn make(name: &str, mask: Option<Vec<usize>>) -> Result<Self> {
        match name {
            "po-integrator" => Self::new(Dynamics::Integrator, mask),
            "po-pendulum" => Self::new(Dynamics::Pendulum, mask),
            "chain-pomdp" => Err(Error::Config(
                "chain-pomdp is a tabular model; use it with `verify`, not for training".into(),
            )),
            other => Err(Error::Config(format!(
                "unknown environment `{other}` (expected one of {ENV_NAMES:?})"
            ))),
        }
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn observe(&self) -> Vec<f64> {
        mask_observe(&self.state, &self.spec.mask)
    }

    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = (0..self.spec.state_dim).map(|_| rng.random_range(-0.5..0.5)).collect();
        self.reset_to(state).expect("state has the right length")
    }

    /// Starts an episode from an explicit latent state.
    pub fn reset_to(&mut self, state: Vec<f64>) -> Result<Vec<f64>> {
        if state.len() != self.spec.state_dim {
            return Err(Error::dim(
                self.spec.name.clone(),
                format!("state has {} entries, expected {}", state.len(), self.spec.state_dim),
            ));
        }
        self.state = state;
        self.t = 0;
        self.done = false;
        Ok(self.observe())
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::Usage(format!("{}: step called on a finished episode; reset first", self.spec.name)));
        }
        if action.len() != self.spec.action_dim {
            return Err(Error::dim(
                self.spec.name.clone(),
                format!("action has {} entries, expected {}", action.len(), self.spec.action_dim),
            ));
        }
        let b = self.spec.action_bound;
        let u = action[0].clamp(-b, b);
        let dt = self.spec.dt;
        let (x, v) = (self.state[0], self.state[1]);
        let (reward, acc) = match self.dynamics {
            Dynamics::Integrator => (-(x * x + 0.1 * v * v), u),
            Dynamics::Pendulum => (-(x * x + 0.1 * v * v + 0.001 * u * u), -10.0 * x.sin() + u),
        };
        self.state = vec![x + dt * v, v + dt * acc];
        self.t += 1;
        let truncated = self.t >= self.spec.horizon;
        self.done = truncated;
        Ok(StepResult {
            observation: self.observe(),
            reward,
            terminated: false,
            truncated,
        })
    }
}
