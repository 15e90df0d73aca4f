//! Twin-critic delayed actor–critic over observation/action windows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{AgentConfig, Variant};
use super::networks::{window_row, Actor, Critic, Dims};
use super::replay::Batch;
use crate::encoder::{EncoderCache, HistoryEncoder};
use crate::error::{Error, Result};
use crate::nn::params::{join, Parameterized};
use crate::nn::{checkpoint, soft_update, AdamState, Layer, NetworkParams};
use crate::tensor::Tensor;

/// Online critics plus the shared encoder (when present): everything the
/// critic loss differentiates.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticSet {
    pub critic1: Critic,
    pub critic2: Critic,
    pub shared: Option<HistoryEncoder>,
}

impl Parameterized for CriticSet {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.critic1.visit(&join(prefix, "critic1"), f);
        self.critic2.visit(&join(prefix, "critic2"), f);
        if let Some(s) = &self.shared {
            s.visit(&join(prefix, "shared_encoder"), f);
        }
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Tensor)) {
        self.critic1.visit_mut(&join(prefix, "critic1"), f);
        self.critic2.visit_mut(&join(prefix, "critic2"), f);
        if let Some(s) = &mut self.shared {
            s.visit_mut(&join(prefix, "shared_encoder"), f);
        }
    }
}

/// Actor and critic set for one role (online or target).
#[derive(Clone, Debug, PartialEq)]
pub struct Networks {
    pub actor: Actor,
    pub critics: CriticSet,
}

impl Parameterized for Networks {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.actor.visit(&join(prefix, "actor"), f);
        self.critics.visit(prefix, f);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Tensor)) {
        self.actor.visit_mut(&join(prefix, "actor"), f);
        self.critics.visit_mut(prefix, f);
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: Option<f64>,
    pub mean_q: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CheckpointMeta {
    config: AgentConfig,
    obs_dim: usize,
    act_dim: usize,
    action_bound: f64,
    update_count: u64,
    actor_adam_steps: u64,
    critic_adam_steps: u64,
}

#[derive(Clone, Debug)]
pub struct Agent {
    pub config: AgentConfig,
    pub dims: Dims,
    pub online: Networks,
    pub target: Networks,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub update_count: u64,
    noise_rng: ChaCha8Rng,
}

/// Joint `[o, a]` past rows `[B, N, obs + act]` for the shared encoder.
fn joint_past(s_bar: &Tensor, a_bar: &Tensor) -> Result<Tensor> {
    let (b, rows, o) = (s_bar.shape()[0], s_bar.shape()[1], s_bar.shape()[2]);
    let a = a_bar.shape()[2];
    let mut out = Vec::with_capacity(b * (rows - 1) * (o + a));
    for s in 0..b {
        for r in 1..rows {
            out.extend_from_slice(&s_bar.data()[(s * rows + r) * o..(s * rows + r + 1) * o]);
            out.extend_from_slice(&a_bar.data()[(s * rows + r) * a..(s * rows + r + 1) * a]);
        }
    }
    Tensor::new([b, rows - 1, o + a], out)
}

fn shared_features(enc: Option<&HistoryEncoder>, s_bar: &Tensor, a_bar: &Tensor) -> Result<Option<(Tensor, EncoderCache)>> {
    enc.map(|e| e.forward(&joint_past(s_bar, a_bar)?)).transpose()
}

/// `[B, R, A]` with row 0 replaced by `a_now: [B, A]`.
fn with_current(a_bar: &Tensor, a_now: &Tensor) -> Tensor {
    let mut out = a_bar.clone();
    let (b, rows, a) = (a_bar.shape()[0], a_bar.shape()[1], a_bar.shape()[2]);
    for s in 0..b {
        out.data_mut()[s * rows * a..s * rows * a + a].copy_from_slice(a_now.row(s));
    }
    out
}

/// Sliding update of each action window: `[a_new, ā rows 0..N−1]`.
fn slide_actions(a_bar: &Tensor, a_new: &Tensor) -> Tensor {
    let (b, rows, a) = (a_bar.shape()[0], a_bar.shape()[1], a_bar.shape()[2]);
    let mut out = Vec::with_capacity(a_bar.len());
    for s in 0..b {
        out.extend_from_slice(a_new.row(s));
        out.extend_from_slice(&a_bar.data()[s * rows * a..(s * rows + rows - 1) * a]);
    }
    Tensor::new([b, rows, a], out).expect("window shape")
}

impl Agent {
    pub fn new(config: AgentConfig, obs_dim: usize, act_dim: usize, action_bound: f64, seed: u64) -> Result<Self> {
        config.validate()?;
        let dims = Dims {
            obs_dim,
            act_dim,
            history_len: config.history_len(),
            action_bound,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = Actor::new(&config, dims, &mut rng)?;
        let critic1 = Critic::new(&config, dims, &mut rng)?;
        let critic2 = Critic::new(&config, dims, &mut rng)?;
        let shared = if config.variant == Variant::V1 && dims.history_len > 0 {
            Some(HistoryEncoder::new(&config.encoder, dims.history_len, obs_dim + act_dim, &mut rng)?)
        } else {
            None
        };
        let online = Networks {
            actor,
            critics: CriticSet { critic1, critic2, shared },
        };
        let actor_opt = AdamState::new(&online.actor, config.actor_lr);
        let critic_opt = AdamState::new(&online.critics, config.critic_lr);
        let noise_rng = ChaCha8Rng::seed_from_u64(rng.random());
        Ok(Self {
            target: online.clone(),
            online,
            config,
            dims,
            actor_opt,
            critic_opt,
            update_count: 0,
            noise_rng,
        })
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    /// Deterministic policy output on a batch: `[B, outputs, act]`.
    pub fn policy(&self, nets: &Networks, s_bar: &Tensor, a_bar: &Tensor) -> Result<Tensor> {
        let shared = shared_features(nets.critics.shared.as_ref(), s_bar, a_bar)?;
        let a = nets.actor.act(s_bar, shared.as_ref().map(|(h, _)| h))?;
        let b = s_bar.shape()[0];
        a.reshape([b, nets.actor.outputs(), self.dims.act_dim])
    }

    /// Deterministic action for a single step. `s_bar` is `[N+1, obs]`;
    /// `a_bar` is the action window `[N+1, act]` whose past rows hold the
    /// previous actions (row 0 is ignored).
    pub fn act(&self, s_bar: &[f64], a_bar: &[f64]) -> Result<Vec<f64>> {
        let rows = self.dims.rows();
        let s = Tensor::new([1, rows, self.dims.obs_dim], s_bar.to_vec())?;
        let a = Tensor::new([1, rows, self.dims.act_dim], a_bar.to_vec())?;
        let seq = self.policy(&self.online, &s, &a)?;
        Ok(seq.data()[..self.dims.act_dim].to_vec())
    }

    /// [`Agent::act`] plus, when exploring, clipped Gaussian noise.
    pub fn select_action(&mut self, s_bar: &[f64], a_bar: &[f64], explore: bool) -> Result<Vec<f64>> {
        let mut action = self.act(s_bar, a_bar)?;
        if explore && self.config.exploration_sigma > 0.0 {
            let bound = self.dims.action_bound;
            let normal = Normal::new(0.0, self.config.exploration_sigma * bound).expect("valid sigma");
            for v in &mut action {
                *v = (*v + normal.sample(&mut self.noise_rng)).clamp(-bound, bound);
            }
        }
        Ok(action)
    }

    /// Next action window under the target actor with smoothing noise.
    pub fn target_action_window(&mut self, batch: &Batch) -> Result<Tensor> {
        let seq = self.policy(&self.target, &batch.s_bar_next, &slide_actions(&batch.a_bar, &window_row(&batch.a_bar, 0)))?;
        let bound = self.dims.action_bound;
        let (sigma, clip) = (self.config.target_noise_sigma * bound, self.config.target_noise_clip * bound);
        let mut noisy = seq;
        if sigma > 0.0 && clip > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("valid sigma");
            for v in noisy.data_mut() {
                let eps: f64 = normal.sample(&mut self.noise_rng);
                *v = (*v + eps.clamp(-clip, clip)).clamp(-bound, bound);
            }
        } else {
            for v in noisy.data_mut() {
                *v = v.clamp(-bound, bound);
            }
        }
        if self.variant() == Variant::V2 {
            return Ok(noisy);
        }
        let b = batch.len();
        let a_new = noisy.reshape([b, self.dims.act_dim])?;
        Ok(slide_actions(&batch.a_bar, &a_new))
    }

    /// `y = r + γ (1 − terminated) min(Q₁′, Q₂′)`.
    pub fn td3_target(&mut self, batch: &Batch) -> Result<Vec<f64>> {
        let a_next = self.target_action_window(batch)?;
        self.target_values(batch, &a_next)
    }

    /// Target values for a given next action window.
    pub fn target_values(&self, batch: &Batch, a_next: &Tensor) -> Result<Vec<f64>> {
        let t = &self.target.critics;
        let shared = shared_features(t.shared.as_ref(), &batch.s_bar_next, a_next)?;
        let shared = shared.as_ref().map(|(h, _)| h);
        let q1 = t.critic1.q(&batch.s_bar_next, a_next, shared)?;
        let q2 = t.critic2.q(&batch.s_bar_next, a_next, shared)?;
        let g = self.config.gamma;
        Ok((0..batch.len())
            .map(|i| {
                let boot = if batch.terminated[i] { 0.0 } else { 1.0 };
                batch.reward[i] + g * boot * q1.data()[i].min(q2.data()[i])
            })
            .collect())
    }

    /// The action window the critics are trained on.
    pub fn critic_action_window(&self, batch: &Batch) -> Result<Tensor> {
        if self.variant() != Variant::V2 {
            return Ok(batch.a_bar.clone());
        }
        // Past actions regenerated by the current actor; the executed one is kept.
        let generated = self.policy(&self.online, &batch.s_bar, &batch.a_bar)?;
        Ok(with_current(&generated, &window_row(&batch.a_bar, 0)))
    }

    pub fn critic_update(&mut self, batch: &Batch) -> Result<(f64, f64)> {
        let y = self.td3_target(batch)?;
        let a_bar = self.critic_action_window(batch)?;
        let (loss, mean_q, grads) = critic_loss_grads(&self.online.critics, &batch.s_bar, &a_bar, &y)?;
        self.critic_opt.step(&mut self.online.critics, &grads)?;
        Ok((loss, mean_q))
    }

    pub fn actor_update(&mut self, batch: &Batch) -> Result<f64> {
        let (loss, grads) = actor_loss_grads(&self.online, self.variant(), &batch.s_bar, &batch.a_bar)?;
        self.actor_opt.step(&mut self.online.actor, &grads)?;
        Ok(loss)
    }

    pub fn update_targets(&mut self) -> Result<()> {
        let tau = self.config.tau;
        soft_update(&mut self.target, &self.online, tau)
    }

    /// One training step: critics, then (every `policy_delay` steps) the
    /// actor and the target networks.
    pub fn update(&mut self, batch: &Batch) -> Result<UpdateStats> {
        let (critic_loss, mean_q) = self.critic_update(batch)?;
        self.update_count += 1;
        let mut actor_loss = None;
        if self.update_count % self.config.policy_delay as u64 == 0 {
            actor_loss = Some(self.actor_update(batch)?);
            self.update_targets()?;
        }
        Ok(UpdateStats {
            critic_loss,
            actor_loss,
            mean_q,
        })
    }

    // ------------------------------------------------------- checkpoints

    pub fn to_checkpoint(&self) -> Result<(serde_json::Value, NetworkParams)> {
        let mut p = NetworkParams::new();
        p.extend_prefixed("online", self.online.to_network_params())?;
        p.extend_prefixed("target", self.target.to_network_params())?;
        for (role, opt, names) in [
            ("adam.actor", &self.actor_opt, self.online.actor.to_network_params()),
            ("adam.critic", &self.critic_opt, self.online.critics.to_network_params()),
        ] {
            for ((name, _), (m, v)) in names.iter().zip(opt.first_moment.iter().zip(&opt.second_moment)) {
                p.insert(format!("{role}.m.{name}"), m.clone())?;
                p.insert(format!("{role}.v.{name}"), v.clone())?;
            }
        }
        let meta = CheckpointMeta {
            config: self.config.clone(),
            obs_dim: self.dims.obs_dim,
            act_dim: self.dims.act_dim,
            action_bound: self.dims.action_bound,
            update_count: self.update_count,
            actor_adam_steps: self.actor_opt.step_count,
            critic_adam_steps: self.critic_opt.step_count,
        };
        let meta = serde_json::to_value(meta).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok((meta, p))
    }

    pub fn from_checkpoint(meta: &serde_json::Value, params: &NetworkParams) -> Result<Self> {
        let meta: CheckpointMeta =
            serde_json::from_value(meta.clone()).map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
        let mut agent = Agent::new(meta.config, meta.obs_dim, meta.act_dim, meta.action_bound, 0)?;
        agent.online.load_network_params(&params.scoped("online"))?;
        agent.target.load_network_params(&params.scoped("target"))?;
        for (role, opt) in [("adam.actor", &mut agent.actor_opt), ("adam.critic", &mut agent.critic_opt)] {
            let m = params.scoped(&format!("{role}.m"));
            let v = params.scoped(&format!("{role}.v"));
            if m.len() != opt.first_moment.len() || v.len() != opt.second_moment.len() {
                return Err(Error::Checkpoint(format!("{role} moments missing or incomplete")));
            }
            for (dst, (_, src)) in opt.first_moment.iter_mut().zip(m.iter()) {
                if dst.shape() != src.shape() {
                    return Err(Error::Checkpoint(format!("{role} moment shape mismatch")));
                }
                *dst = src.clone();
            }
            for (dst, (_, src)) in opt.second_moment.iter_mut().zip(v.iter()) {
                if dst.shape() != src.shape() {
                    return Err(Error::Checkpoint(format!("{role} moment shape mismatch")));
                }
                *dst = src.clone();
            }
        }
        agent.actor_opt.step_count = meta.actor_adam_steps;
        agent.critic_opt.step_count = meta.critic_adam_steps;
        agent.update_count = meta.update_count;
        Ok(agent)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let (meta, params) = self.to_checkpoint()?;
        checkpoint::save(path, &meta, &params)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let (meta, params) = checkpoint::load(path)?;
        Self::from_checkpoint(&meta, &params)
    }
}

/// `J(θ) = mean (Q₁ − y)² + mean (Q₂ − y)²` with gradients for both critics
/// and the shared encoder. Returns `(J, mean Q₁, ∂J/∂θ)`.
pub fn critic_loss_grads(set: &CriticSet, s_bar: &Tensor, a_bar: &Tensor, y: &[f64]) -> Result<(f64, f64, CriticSet)> {
    let b = y.len();
    let shared = shared_features(set.shared.as_ref(), s_bar, a_bar)?;
    let h = shared.as_ref().map(|(h, _)| h);
    let mut loss = 0.0;
    let mut mean_q = 0.0;
    let mut d_shared: Option<Tensor> = None;
    let mut grads = Vec::with_capacity(2);
    for (k, critic) in [&set.critic1, &set.critic2].into_iter().enumerate() {
        let (q, cache) = critic.forward(s_bar, a_bar, h)?;
        let mut dq = q.zeros_like();
        for i in 0..b {
            let err = q.data()[i] - y[i];
            loss += err * err / b as f64;
            dq.data_mut()[i] = 2.0 * err / b as f64;
        }
        if k == 0 {
            mean_q = q.sum() / b as f64;
        }
        let (g, ds) = critic.backward(&cache, &dq)?;
        if let Some(ds) = ds {
            match &mut d_shared {
                Some(acc) => acc.add_assign(&ds),
                None => d_shared = Some(ds),
            }
        }
        grads.push(g);
    }
    let g_shared = match (&set.shared, shared, d_shared) {
        (Some(enc), Some((_, cache)), Some(ds)) => Some(enc.backward(&cache, &ds)?.0),
        (Some(enc), _, _) => Some(enc.zeros_like()),
        _ => None,
    };
    let critic2 = grads.pop().expect("two critics");
    let critic1 = grads.pop().expect("two critics");
    Ok((
        loss,
        mean_q,
        CriticSet {
            critic1,
            critic2,
            shared: g_shared,
        },
    ))
}

/// `J(φ) = −mean Q₁(s̄, ā′)` where `ā′` holds the actor's fresh action in
/// row 0 (every row for the sequence-emitting variant) and stored actions
/// elsewhere. The shared encoder is treated as fixed. Returns `(J, ∂J/∂φ)`.
pub fn actor_loss_grads(nets: &Networks, variant: Variant, s_bar: &Tensor, a_bar: &Tensor) -> Result<(f64, Actor)> {
    let b = s_bar.shape()[0];
    let shared = shared_features(nets.critics.shared.as_ref(), s_bar, a_bar)?;
    let h = shared.as_ref().map(|(h, _)| h);
    let (a, actor_cache) = nets.actor.forward(s_bar, h)?;
    let rows = a_bar.shape()[1];
    let act = a_bar.shape()[2];
    let a_used = if variant == Variant::V2 {
        a.clone().reshape([b, rows, act])?
    } else {
        with_current(a_bar, &a)
    };
    let (q, cache) = nets.critics.critic1.forward(s_bar, &a_used, h)?;
    let loss = -q.sum() / b as f64;
    let dq = Tensor::full(&[b, 1], -1.0 / b as f64);
    let da_bar = nets.critics.critic1.action_grad(&cache, &dq)?;
    let da = if variant == Variant::V2 {
        da_bar.reshape([b, rows * act])?
    } else {
        window_row(&da_bar, 0)
    };
    let (grads, _) = nets.actor.backward(&actor_cache, &da)?;
    Ok((loss, grads))
}

/// Smallest `|pre-activation|` of any hidden ReLU that `J(θ)` (on
/// `critic_a_bar`) or `J(φ)` (on `a_bar`) passes through.
pub fn loss_relu_margin(nets: &Networks, variant: Variant, s_bar: &Tensor, critic_a_bar: &Tensor, a_bar: &Tensor) -> Result<f64> {
    let set = &nets.critics;
    let mut m = f64::INFINITY;
    let shared = shared_features(set.shared.as_ref(), s_bar, critic_a_bar)?;
    for c in [&set.critic1, &set.critic2] {
        m = m.min(c.forward(s_bar, critic_a_bar, shared.as_ref().map(|(h, _)| h))?.1.relu_margin());
    }
    let shared = shared_features(set.shared.as_ref(), s_bar, a_bar)?;
    let h = shared.as_ref().map(|(h, _)| h);
    let (a, cache) = nets.actor.forward(s_bar, h)?;
    m = m.min(cache.relu_margin());
    let a_used = if variant == Variant::V2 {
        a.reshape(a_bar.shape().to_vec())?
    } else {
        with_current(a_bar, &a)
    };
    Ok(m.min(set.critic1.forward(s_bar, &a_used, h)?.1.relu_margin()))
}
