use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::mean_std;
use crate::agent::Agent;
use crate::envs::Env;
use crate::error::{Error, Result};
use crate::pomdp::sliding_window_update;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalStats {
    pub mean: f64,
    pub std: f64,
    pub returns: Vec<f64>,
}

impl EvalStats {
    pub fn from_returns(returns: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&returns);
        Self { mean, std, returns }
    }
}

#[derive(Clone, Debug)]
pub enum Start {
    Seed(u64),
    State(Vec<f64>),
}

pub fn check_compatible(agent: &Agent, env: &Env) -> Result<()> {
    let s = env.spec();
    if agent.dims.obs_dim != s.obs_dim() || agent.dims.act_dim != s.action_dim {
        return Err(Error::Config(format!(
            "agent expects obs_dim {} / act_dim {}, {} provides {} / {}",
            agent.dims.obs_dim,
            agent.dims.act_dim,
            s.name,
            s.obs_dim(),
            s.action_dim
        )));
    }
    Ok(())
}

/// One deterministic episode. The first `N` steps fill the window with zero
/// actions; the policy acts from then on.
pub fn rollout(agent: &Agent, env: &mut Env, start: Start) -> Result<f64> {
    check_compatible(agent, env)?;
    let n = agent.dims.history_len;
    let act_dim = agent.dims.act_dim;
    let o = match start {
        Start::Seed(seed) => env.reset(seed),
        Start::State(s) => env.reset_to(s)?,
    };
    let mut obs = vec![o];
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut total = 0.0;
    loop {
        let a = if obs.len() < n + 1 {
            vec![0.0; act_dim]
        } else {
            let mut a_bar = vec![0.0; act_dim];
            a_bar.extend(acts.concat());
            agent.act(&obs.concat(), &a_bar)?
        };
        let r = env.step(&a)?;
        total += r.reward;
        if r.done() {
            return Ok(total);
        }
        if obs.len() < n + 1 {
            obs.insert(0, r.observation);
            acts.insert(0, a);
        } else {
            obs = sliding_window_update(&obs, r.observation);
            if n > 0 {
                acts = sliding_window_update(&acts, a);
            }
        }
    }
}

/// Deterministic policy over `episodes` starts drawn from `seed`.
pub fn evaluate(agent: &Agent, env: &mut Env, episodes: usize, seed: u64) -> Result<EvalStats> {
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let returns = (0..episodes)
        .map(|_| rollout(agent, env, Start::Seed(seeds.random())))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalStats::from_returns(returns))
}

/// Uniform-random actions over the same starts [`evaluate`] would use.
pub fn random_policy_returns(env: &mut Env, episodes: usize, seed: u64) -> Result<EvalStats> {
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let bound = env.spec().action_bound;
    let dim = env.spec().action_dim;
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        env.reset(seeds.random());
        let mut total = 0.0;
        loop {
            let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-bound..=bound)).collect();
            let r = env.step(&a)?;
            total += r.reward;
            if r.done() {
                break;
            }
        }
        returns.push(total);
    }
    Ok(EvalStats::from_returns(returns))
}
