//! Finite POMDPs and their reformulation as an MDP over observation windows.
//!
//! Tables use `ndarray` with the state on the leading axis:
//! `P[s, a, s′]`, `R[s, a]`, `O[s, o]`, `π[s, a]`.

pub mod belief;
pub mod oracle;
pub mod window;

use std::path::Path;

use ndarray::{Array1, Array2, Array3};
use serde::Deserialize;

use crate::error::{Error, Result};

pub use belief::{
    induced_policy, induced_transition, joint_observation, multi_step_observation,
    posterior_chain, window_transition, BeliefChain,
};
pub use oracle::{brute_force_window_transition, exact_filter_posterior, OracleTable, ORACLE_LIMIT};
pub use window::{sliding_window_matrix, sliding_window_update, WindowState};

/// Row sums must hit 1 within this tolerance.
pub const SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct TabularPomdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub n_obs: usize,
    pub p: Array3<f64>,
    pub r: Array2<f64>,
    pub o: Array2<f64>,
    /// Distribution of the oldest hidden state in a window; uniform if absent.
    pub prior: Option<Array1<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TabularPolicy {
    pub pi: Array2<f64>,
}

fn check_row(row: impl IntoIterator<Item = f64>, label: &str) -> Result<()> {
    let mut sum = 0.0;
    for v in row {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Probability(format!("{label} has entry {v}")));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::Probability(format!("{label} sums to {sum}, expected 1")));
    }
    Ok(())
}

impl TabularPomdp {
    pub fn new(p: Array3<f64>, r: Array2<f64>, o: Array2<f64>, prior: Option<Array1<f64>>) -> Result<Self> {
        let (s, a, s2) = p.dim();
        let n_obs = o.ncols();
        if s == 0 || a == 0 || n_obs == 0 {
            return Err(Error::Probability("empty state, action or observation space".into()));
        }
        if s2 != s {
            return Err(Error::Probability(format!("P has shape [{s}, {a}, {s2}], expected [S, A, S]")));
        }
        if r.dim() != (s, a) {
            return Err(Error::Probability(format!("R has shape {:?}, expected [{s}, {a}]", r.dim())));
        }
        if o.nrows() != s {
            return Err(Error::Probability(format!("O has {} rows, expected {s}", o.nrows())));
        }
        if let Some(pr) = &prior {
            if pr.len() != s {
                return Err(Error::Probability(format!("prior has {} entries, expected {s}", pr.len())));
            }
        }
        let m = Self {
            n_states: s,
            n_actions: a,
            n_obs,
            p,
            r,
            o,
            prior,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                check_row(self.p.slice(ndarray::s![s, a, ..]).iter().copied(), &format!("P[s={s}, a={a}]"))?;
            }
            check_row(self.o.row(s).iter().copied(), &format!("O[s={s}]"))?;
        }
        if let Some(pr) = &self.prior {
            check_row(pr.iter().copied(), "prior")?;
        }
        if self.r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Probability("R has a non-finite entry".into()));
        }
        Ok(())
    }

    pub fn prior(&self) -> Array1<f64> {
        self.prior
            .clone()
            .unwrap_or_else(|| Array1::from_elem(self.n_states, 1.0 / self.n_states as f64))
    }

    /// `O` is the identity (states observed directly).
    pub fn is_fully_observed(&self) -> bool {
        self.n_obs == self.n_states
            && self
                .o
                .indexed_iter()
                .all(|((s, o), &v)| v == if s == o { 1.0 } else { 0.0 })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct File {
            n_states: usize,
            n_actions: usize,
            n_obs: usize,
            #[serde(rename = "P")]
            p: Vec<Vec<Vec<f64>>>,
            #[serde(rename = "R")]
            r: Vec<Vec<f64>>,
            #[serde(rename = "O")]
            o: Vec<Vec<f64>>,
            prior: Option<Vec<f64>>,
        }
        let f: File = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let (s, a, no) = (f.n_states, f.n_actions, f.n_obs);
        let mut p = Array3::zeros((s, a, s));
        if f.p.len() != s {
            return Err(Error::Parse(format!("P has {} state blocks, expected {s}", f.p.len())));
        }
        for (si, block) in f.p.iter().enumerate() {
            if block.len() != a {
                return Err(Error::Parse(format!("P[s={si}] has {} action rows, expected {a}", block.len())));
            }
            for (ai, row) in block.iter().enumerate() {
                if row.len() != s {
                    return Err(Error::Parse(format!("P[s={si}, a={ai}] has {} entries, expected {s}", row.len())));
                }
                for (sj, &v) in row.iter().enumerate() {
                    p[[si, ai, sj]] = v;
                }
            }
        }
        let r = table(&f.r, s, a, "R")?;
        let o = table(&f.o, s, no, "O")?;
        Self::new(p, r, o, f.prior.map(Array1::from))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

fn table(rows: &[Vec<f64>], n: usize, m: usize, name: &str) -> Result<Array2<f64>> {
    if rows.len() != n {
        return Err(Error::Parse(format!("{name} has {} rows, expected {n}", rows.len())));
    }
    let mut t = Array2::zeros((n, m));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != m {
            return Err(Error::Parse(format!("{name}[{i}] has {} entries, expected {m}", row.len())));
        }
        for (j, &v) in row.iter().enumerate() {
            t[[i, j]] = v;
        }
    }
    Ok(t)
}

impl TabularPolicy {
    pub fn new(pi: Array2<f64>) -> Result<Self> {
        for (s, row) in pi.rows().into_iter().enumerate() {
            check_row(row.iter().copied(), &format!("pi[s={s}]"))?;
        }
        Ok(Self { pi })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            pi: Array2::from_elem((n_states, n_actions), 1.0 / n_actions as f64),
        }
    }

    pub fn check_against(&self, pomdp: &TabularPomdp) -> Result<()> {
        if self.pi.dim() != (pomdp.n_states, pomdp.n_actions) {
            return Err(Error::Probability(format!(
                "policy has shape {:?}, POMDP needs [{}, {}]",
                self.pi.dim(),
                pomdp.n_states,
                pomdp.n_actions
            )));
        }
        Ok(())
    }

    pub fn from_toml(text: &str, n_states: usize, n_actions: usize) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct File {
            pi: Vec<Vec<f64>>,
        }
        let f: File = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(table(&f.pi, n_states, n_actions, "pi")?)
    }

    pub fn load(path: &Path, n_states: usize, n_actions: usize) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?, n_states, n_actions)
    }
}

/// The bundled two-state chain used by `verify chain-pomdp`.
pub const CHAIN_POMDP: &str = include_str!("../../data/chain_pomdp.toml");

pub fn chain_pomdp() -> TabularPomdp {
    TabularPomdp::from_toml(CHAIN_POMDP).expect("bundled chain POMDP is valid")
}
