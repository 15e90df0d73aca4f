use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One stored step. Windows are `[(N+1) × dim]`, newest row first.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s_bar: Vec<f64>,
    pub a_bar: Vec<f64>,
    pub reward: f64,
    pub s_bar_next: Vec<f64>,
    pub terminated: bool,
}

/// A sampled minibatch in tensor form.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    /// `[B, N+1, obs_dim]`
    pub s_bar: Tensor,
    /// `[B, N+1, act_dim]`
    pub a_bar: Tensor,
    pub reward: Vec<f64>,
    pub s_bar_next: Tensor,
    pub terminated: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.reward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reward.is_empty()
    }

    pub fn from_transitions(ts: &[Transition], rows: usize, obs_dim: usize, act_dim: usize) -> Result<Self> {
        let b = ts.len();
        let cat = |f: &dyn Fn(&Transition) -> &[f64]| ts.iter().flat_map(|t| f(t).to_vec()).collect::<Vec<_>>();
        Ok(Self {
            s_bar: Tensor::new([b, rows, obs_dim], cat(&|t| &t.s_bar))?,
            a_bar: Tensor::new([b, rows, act_dim], cat(&|t| &t.a_bar))?,
            reward: ts.iter().map(|t| t.reward).collect(),
            s_bar_next: Tensor::new([b, rows, obs_dim], cat(&|t| &t.s_bar_next))?,
            terminated: ts.iter().map(|t| t.terminated).collect(),
        })
    }
}

/// Fixed-capacity ring of transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    rows: usize,
    obs_dim: usize,
    act_dim: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, rows: usize, obs_dim: usize, act_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            rows,
            obs_dim,
            act_dim,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.s_bar.len() != self.rows * self.obs_dim
            || t.s_bar_next.len() != self.rows * self.obs_dim
            || t.a_bar.len() != self.rows * self.act_dim
        {
            return Err(Error::dim(
                "replay buffer",
                format!("transition windows do not match {} rows of {}/{} features", self.rows, self.obs_dim, self.act_dim),
            ));
        }
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        Ok(())
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Indices of a uniform sample without replacement.
    pub fn sample_indices(&self, batch: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
        if self.items.len() < batch {
            return Err(Error::NotReady {
                size: self.items.len(),
                requested: batch,
            });
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), batch).into_vec())
    }

    pub fn sample(&self, batch: usize, rng: &mut impl Rng) -> Result<Batch> {
        let idx = self.sample_indices(batch, rng)?;
        let picked: Vec<Transition> = idx.iter().map(|&i| self.items[i].clone()).collect();
        Batch::from_transitions(&picked, self.rows, self.obs_dim, self.act_dim)
    }
}
