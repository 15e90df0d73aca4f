//! Brute-force enumeration of hidden-state paths.
//!
//! Computes the same quantities as [`super::belief`] without matrix
//! products: every table entry is a sum over explicit state sequences, with
//! the policy-induced kernel expanded over actions at each step.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};

use super::window::WindowState;
use super::{TabularPolicy, TabularPomdp};
use crate::error::{Error, Result};

/// Upper bound on `|S|^(N+2) · |S_o|^(N+2) · |A|`.
pub const ORACLE_LIMIT: u128 = 10_000_000;

#[derive(Clone, Debug)]
pub struct WindowOracle {
    pub q: Vec<Array1<f64>>,
    /// `[A × S_o]`
    pub p_bar: Array2<f64>,
    pub varpi: Array1<f64>,
}

#[derive(Clone, Debug)]
pub struct OracleTable {
    pub n: usize,
    /// `O_k[s, o]` for `k = 0..=N`.
    pub o_k: Vec<Array2<f64>>,
    /// `None` for windows with zero likelihood under the prior.
    pub windows: BTreeMap<Vec<usize>, Option<WindowOracle>>,
}

/// Calls `f` on every sequence of `len` states.
fn for_each_path(states: usize, len: usize, mut f: impl FnMut(&[usize])) {
    let mut path = vec![0usize; len];
    loop {
        f(&path);
        let mut i = len;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            path[i] += 1;
            if path[i] < states {
                break;
            }
            path[i] = 0;
        }
    }
}

fn kernel(m: &TabularPomdp, pi: &TabularPolicy, from: usize, to: usize) -> f64 {
    (0..m.n_actions).map(|a| pi.pi[[from, a]] * m.p[[from, a, to]]).sum()
}

fn path_weight(m: &TabularPomdp, pi: &TabularPolicy, path: &[usize]) -> f64 {
    path.windows(2).map(|w| kernel(m, pi, w[0], w[1])).product()
}

pub fn enumeration_terms(m: &TabularPomdp, n: usize) -> u128 {
    let e = n as u32 + 2;
    (m.n_states as u128).pow(e) * (m.n_obs as u128).pow(e) * m.n_actions as u128
}

fn guard(m: &TabularPomdp, n: usize) -> Result<()> {
    let terms = enumeration_terms(m, n);
    if terms > ORACLE_LIMIT {
        return Err(Error::GuardExceeded {
            terms,
            limit: ORACLE_LIMIT,
        });
    }
    Ok(())
}

/// Enumerated `O_k(o | s_0)` for `k = 0..=n`.
fn observation_tables(m: &TabularPomdp, pi: &TabularPolicy, n: usize) -> Vec<Array2<f64>> {
    (0..=n)
        .map(|k| {
            let mut t = Array2::zeros((m.n_states, m.n_obs));
            for_each_path(m.n_states, k + 1, |path| {
                let w = path_weight(m, pi, path);
                let last = path[k];
                for o in 0..m.n_obs {
                    t[[path[0], o]] += w * m.o[[last, o]];
                }
            });
            t
        })
        .collect()
}

/// Every window of length `n + 1`, every action.
pub fn brute_force_window_transition(
    m: &TabularPomdp,
    pi: &TabularPolicy,
    n: usize,
    prior: &Array1<f64>,
) -> Result<OracleTable> {
    guard(m, n)?;
    let o_k = observation_tables(m, pi, n);
    let mut windows = BTreeMap::new();
    for w in WindowState::all(m.n_obs, n) {
        let entry = window_oracle(m, pi, &o_k, &w, prior);
        windows.insert(w.obs_ids, entry);
    }
    Ok(OracleTable { n, o_k, windows })
}

fn window_oracle(
    m: &TabularPomdp,
    pi: &TabularPolicy,
    o_k: &[Array2<f64>],
    w: &WindowState,
    prior: &Array1<f64>,
) -> Option<WindowOracle> {
    let n = w.history_len();
    let s = m.n_states;
    let mut q0: Vec<f64> = (0..s)
        .map(|s0| {
            let mut v = prior[s0];
            for (k, t) in o_k.iter().enumerate() {
                v *= t[[s0, w.obs_ids[n - k]]];
            }
            v
        })
        .collect();
    let z: f64 = q0.iter().sum();
    if z <= 0.0 {
        return None;
    }
    q0.iter_mut().for_each(|v| *v /= z);

    let mut q = vec![Array1::zeros(s); n + 1];
    let mut p_bar = Array2::zeros((m.n_actions, m.n_obs));
    let mut varpi = Array1::zeros(m.n_actions);
    for_each_path(s, n + 1, |path| {
        let weight = q0[path[0]] * path_weight(m, pi, path);
        for (k, &sk) in path.iter().enumerate() {
            q[k][sk] += weight;
        }
        let last = path[n];
        for a in 0..m.n_actions {
            varpi[a] += weight * pi.pi[[last, a]];
            for next in 0..s {
                let step = weight * m.p[[last, a, next]];
                for o in 0..m.n_obs {
                    p_bar[[a, o]] += step * m.o[[next, o]];
                }
            }
        }
    });
    Some(WindowOracle { q, p_bar, varpi })
}

/// Posterior over `s_t` given the whole window under the joint model (prior on
/// `s_{t−N}`, policy-induced dynamics, one observation per step). Unlike `Q_N`
/// it accounts for correlation between observations through shared paths.
pub fn exact_filter_posterior(
    m: &TabularPomdp,
    pi: &TabularPolicy,
    w: &WindowState,
    prior: &Array1<f64>,
) -> Result<Array1<f64>> {
    w.check(m.n_obs)?;
    let n = w.history_len();
    let mut post = Array1::<f64>::zeros(m.n_states);
    for_each_path(m.n_states, n + 1, |path| {
        let mut v = prior[path[0]] * path_weight(m, pi, path);
        for (k, &sk) in path.iter().enumerate() {
            v *= m.o[[sk, w.obs_ids[n - k]]];
        }
        post[path[n]] += v;
    });
    let z = post.sum();
    if z <= 0.0 {
        return Err(Error::ImpossibleEvidence {
            window: w.obs_ids.clone(),
        });
    }
    Ok(post / z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomdp::belief::BeliefChain;
    use ndarray::{array, Array3};

    #[test]
    fn paths_cover_every_sequence() {
        let mut seen = Vec::new();
        for_each_path(2, 3, |p| seen.push(p.to_vec()));
        assert_eq!(seen.len(), 8);
        assert_eq!(seen[5], vec![1, 0, 1]);
    }

    #[test]
    fn guard_refuses_large_instances() {
        let p = Array3::from_elem((10, 2, 10), 0.1);
        let m = TabularPomdp::new(p, Array2::zeros((10, 2)), Array2::from_elem((10, 5), 0.2), None).unwrap();
        let err = brute_force_window_transition(&m, &TabularPolicy::uniform(10, 2), 3, &m.prior()).unwrap_err();
        match err {
            Error::GuardExceeded { terms, limit } => {
                assert_eq!(terms, 10u128.pow(5) * 5u128.pow(5) * 2);
                assert_eq!(limit, ORACLE_LIMIT);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn chain_agrees_with_matrix_route() {
        let m = crate::pomdp::chain_pomdp();
        let pi = TabularPolicy::uniform(2, 1);
        let table = brute_force_window_transition(&m, &pi, 1, &m.prior()).unwrap();
        for (ids, entry) in &table.windows {
            let c = BeliefChain::compute(&m, &pi, &WindowState::new(ids.clone()), &m.prior()).unwrap();
            let e = entry.as_ref().unwrap();
            for (a, b) in c.p_bar.iter().zip(e.p_bar.iter()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn fully_observed_reduces_to_p() {
        let p = Array3::from_shape_vec((2, 2, 2), vec![0.9, 0.1, 0.2, 0.8, 0.4, 0.6, 0.5, 0.5]).unwrap();
        let m = TabularPomdp::new(p, Array2::zeros((2, 2)), Array2::eye(2), None).unwrap();
        let table = brute_force_window_transition(&m, &TabularPolicy::uniform(2, 2), 0, &m.prior()).unwrap();
        for s in 0..2 {
            let e = table.windows[&vec![s]].as_ref().unwrap();
            for a in 0..2 {
                assert_eq!(e.p_bar.row(a), m.p.slice(ndarray::s![s, a, ..]));
            }
        }
    }

    #[test]
    fn uninformative_observation_hand_mixture() {
        // O carries no information; with prior q the next-observation law is
        // O-row applied to q · P_π · P_a, which is uniform here.
        let p = Array3::from_shape_vec((2, 1, 2), vec![0.6, 0.4, 0.1, 0.9]).unwrap();
        let m = TabularPomdp::new(p, Array2::zeros((2, 1)), Array2::from_elem((2, 2), 0.5), Some(array![0.3, 0.7])).unwrap();
        let pi = TabularPolicy::uniform(2, 1);
        let table = brute_force_window_transition(&m, &pi, 1, &m.prior()).unwrap();
        // Q_1 = prior · P = [0.3·0.6 + 0.7·0.1, 0.3·0.4 + 0.7·0.9] = [0.25, 0.75]
        for entry in table.windows.values() {
            let e = entry.as_ref().unwrap();
            assert!((e.q[1][0] - 0.25).abs() < 1e-15);
            assert!((e.q[1][1] - 0.75).abs() < 1e-15);
            assert!((e.p_bar[[0, 0]] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_filter_matches_factorized_posterior_when_n_is_zero() {
        let m = crate::pomdp::chain_pomdp();
        let pi = TabularPolicy::uniform(2, 1);
        for o in 0..2 {
            let w = WindowState::new(vec![o]);
            let exact = exact_filter_posterior(&m, &pi, &w, &m.prior()).unwrap();
            let c = BeliefChain::compute(&m, &pi, &w, &m.prior()).unwrap();
            for (a, b) in exact.iter().zip(c.q[0].iter()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }
}
