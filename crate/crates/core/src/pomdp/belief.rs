//! Matrix route through the window reformulation.
//!
//! For a window `[o_t, …, o_{t−N}]` (newest first):
//!
//! ```text
//! O_k      = P_πᵏ · O                                   O_k[s, o] = P(o_{t−N+k} = o | s_{t−N} = s)
//! Ō(w | s) = Π_k O_k[s, o_{t−N+k}]
//! Q_0      ∝ Ō(w | ·) ⊙ prior
//! Q_k      = Q_{k−1} · P_π
//! P̄(o′ | w, a) = Σ_{s, s′} O[s′, o′] P[s, a, s′] Q_N[s]
//! ϖ(a | w)     = Σ_s π[s, a] Q_N[s]
//! ```

use ndarray::{Array1, Array2, Axis};

use super::window::WindowState;
use super::{TabularPolicy, TabularPomdp};
use crate::error::{Error, Result};

/// `P_π[s, s′] = Σ_a π[s, a] P[s, a, s′]`.
pub fn induced_transition(pomdp: &TabularPomdp, policy: &TabularPolicy) -> Array2<f64> {
    let s = pomdp.n_states;
    let mut out = Array2::zeros((s, s));
    for from in 0..s {
        for a in 0..pomdp.n_actions {
            let w = policy.pi[[from, a]];
            for to in 0..s {
                out[[from, to]] += w * pomdp.p[[from, a, to]];
            }
        }
    }
    out
}

/// `[O_0, …, O_N]`, each `[S × S_o]`.
pub fn multi_step_observation(o: &Array2<f64>, p_pi: &Array2<f64>, n: usize) -> Vec<Array2<f64>> {
    let mut out = Vec::with_capacity(n + 1);
    let mut current = o.clone();
    out.push(current.clone());
    for _ in 0..n {
        current = p_pi.dot(&current);
        out.push(current.clone());
    }
    out
}

/// `Ō(w | s)` for every `s`.
pub fn joint_observation(o_list: &[Array2<f64>], window: &WindowState) -> Result<Array1<f64>> {
    let n = window.history_len();
    if o_list.len() != n + 1 {
        return Err(Error::dim(
            "joint observation",
            format!("{} observation tables for a window of {} steps", o_list.len(), n + 1),
        ));
    }
    let states = o_list[0].nrows();
    let mut out = Array1::ones(states);
    for (k, ok) in o_list.iter().enumerate() {
        let obs = window.obs_ids[n - k];
        out *= &ok.column(obs);
    }
    Ok(out)
}

/// `[Q_0, …, Q_N]`; `Q_0` is the posterior over `s_{t−N}`, `Q_N` over `s_t`.
pub fn posterior_chain(
    pomdp: &TabularPomdp,
    policy: &TabularPolicy,
    window: &WindowState,
    prior: &Array1<f64>,
) -> Result<Vec<Array1<f64>>> {
    window.check(pomdp.n_obs)?;
    let p_pi = induced_transition(pomdp, policy);
    let o_list = multi_step_observation(&pomdp.o, &p_pi, window.history_len());
    chain_from(&o_list, &p_pi, window, prior)
}

fn chain_from(
    o_list: &[Array2<f64>],
    p_pi: &Array2<f64>,
    window: &WindowState,
    prior: &Array1<f64>,
) -> Result<Vec<Array1<f64>>> {
    let mut q0 = joint_observation(o_list, window)? * prior;
    let z = q0.sum();
    if z <= 0.0 {
        return Err(Error::ImpossibleEvidence {
            window: window.obs_ids.clone(),
        });
    }
    q0 /= z;
    let mut out = vec![q0];
    for _ in 0..window.history_len() {
        let next = out.last().expect("non-empty").dot(p_pi);
        out.push(next);
    }
    Ok(out)
}

/// `P̄(· | w, a)` over the next observation.
pub fn window_transition(
    pomdp: &TabularPomdp,
    policy: &TabularPolicy,
    window: &WindowState,
    action: usize,
    prior: &Array1<f64>,
) -> Result<Array1<f64>> {
    if action >= pomdp.n_actions {
        return Err(Error::Usage(format!("action {action} out of range")));
    }
    let q = posterior_chain(pomdp, policy, window, prior)?;
    Ok(next_observation(pomdp, q.last().expect("non-empty"), action))
}

fn next_observation(pomdp: &TabularPomdp, q_n: &Array1<f64>, action: usize) -> Array1<f64> {
    let p_a = pomdp.p.index_axis(Axis(1), action);
    q_n.dot(&p_a).dot(&pomdp.o)
}

/// `ϖ(· | w)`.
pub fn induced_policy(policy: &TabularPolicy, q_n: &Array1<f64>) -> Array1<f64> {
    q_n.dot(&policy.pi)
}

/// Everything the reformulation defines for one window.
#[derive(Clone, Debug)]
pub struct BeliefChain {
    pub o_k: Vec<Array2<f64>>,
    pub q: Vec<Array1<f64>>,
    /// `[A × S_o]`
    pub p_bar: Array2<f64>,
    pub varpi: Array1<f64>,
}

impl BeliefChain {
    pub fn compute(
        pomdp: &TabularPomdp,
        policy: &TabularPolicy,
        window: &WindowState,
        prior: &Array1<f64>,
    ) -> Result<Self> {
        window.check(pomdp.n_obs)?;
        let p_pi = induced_transition(pomdp, policy);
        let o_k = multi_step_observation(&pomdp.o, &p_pi, window.history_len());
        let q = chain_from(&o_k, &p_pi, window, prior)?;
        let q_n = q.last().expect("non-empty");
        let mut p_bar = Array2::zeros((pomdp.n_actions, pomdp.n_obs));
        for a in 0..pomdp.n_actions {
            p_bar.row_mut(a).assign(&next_observation(pomdp, q_n, a));
        }
        let varpi = induced_policy(policy, q_n);
        Ok(Self { o_k, q, p_bar, varpi })
    }
}
