use std::fmt;

use ndarray::{Array1, Array2, Zip};

use crate::error::{Error, Result};
use crate::pomdp::{
    brute_force_window_transition, exact_filter_posterior, induced_policy, induced_transition, multi_step_observation,
    posterior_chain, window_transition, TabularPolicy, TabularPomdp, WindowState,
};

/// Largest tolerated deviation from the enumeration oracle.
pub const VERIFY_TOL: f64 = 1e-10;

/// Maximum absolute deviation of each closed-form quantity from path
/// enumeration, over every window.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub n: usize,
    pub windows: usize,
    /// Windows with zero likelihood under the prior (both sides agree).
    pub impossible: usize,
    pub o_k: f64,
    pub q_k: f64,
    pub p_bar: f64,
    pub varpi: f64,
    /// `max |P̄ − P|` at `N = 0`; present when observations are the identity.
    pub collapse: Option<f64>,
    /// `max |Q_N − exact filter|`. Informational: `Q_N` treats the window's
    /// observations as independent evidence about `s_{t−N}`.
    pub filter_gap: f64,
}

impl VerifyReport {
    pub fn max_deviation(&self) -> f64 {
        [self.o_k, self.q_k, self.p_bar, self.varpi, self.collapse.unwrap_or(0.0)]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_deviation() <= VERIFY_TOL
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "N = {}, {} windows ({} impossible)", self.n, self.windows, self.impossible)?;
        writeln!(f, "{:<28}{:>12}", "quantity", "max |dev|")?;
        for (name, v) in [("O_k", self.o_k), ("Q_k", self.q_k), ("P_bar", self.p_bar), ("varpi", self.varpi)] {
            writeln!(f, "{name:<28}{v:>12.3e}")?;
        }
        if let Some(c) = self.collapse {
            writeln!(f, "{:<28}{c:>12.3e}", "P_bar vs P (identity O, N=0)")?;
        }
        writeln!(f, "note: max |Q_N - exact filter| = {:.3e} (not checked)", self.filter_gap)?;
        write!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

fn max_abs2(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let mut m = 0.0f64;
    Zip::from(a).and(b).for_each(|x, y| m = m.max((x - y).abs()));
    m
}

fn max_abs1(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn verify_pomdp(m: &TabularPomdp, pi: &TabularPolicy, n: usize) -> Result<VerifyReport> {
    pi.check_against(m)?;
    let prior = m.prior();
    let oracle = brute_force_window_transition(m, pi, n, &prior)?;
    let o_k = multi_step_observation(&m.o, &induced_transition(m, pi), n);
    let mut r = VerifyReport {
        n,
        windows: 0,
        impossible: 0,
        o_k: o_k.iter().zip(&oracle.o_k).map(|(a, b)| max_abs2(a, b)).fold(0.0, f64::max),
        q_k: 0.0,
        p_bar: 0.0,
        varpi: 0.0,
        collapse: None,
        filter_gap: 0.0,
    };
    for (ids, expect) in &oracle.windows {
        r.windows += 1;
        let w = WindowState::new(ids.clone());
        let q = posterior_chain(m, pi, &w, &prior);
        let expect = match (q, expect) {
            (Err(Error::ImpossibleEvidence { .. }), None) => {
                r.impossible += 1;
                continue;
            }
            (Ok(q), Some(e)) => {
                for (a, b) in q.iter().zip(&e.q) {
                    r.q_k = r.q_k.max(max_abs1(a, b));
                }
                let q_n = q.last().expect("non-empty");
                r.varpi = r.varpi.max(max_abs1(&induced_policy(pi, q_n), &e.varpi));
                // The factorized likelihood can admit windows the joint
                // model rules out; those have no filter posterior to compare.
                match exact_filter_posterior(m, pi, &w, &prior) {
                    Ok(f) => r.filter_gap = r.filter_gap.max(max_abs1(q_n, &f)),
                    Err(Error::ImpossibleEvidence { .. }) => {}
                    Err(e) => return Err(e),
                }
                e
            }
            (Err(e), _) => return Err(e),
            (Ok(_), None) => {
                return Err(Error::Probability(format!(
                    "window {ids:?}: closed form finds evidence the oracle rules out"
                )))
            }
        };
        for a in 0..m.n_actions {
            let row = window_transition(m, pi, &w, a, &prior)?;
            r.p_bar = r.p_bar.max(max_abs1(&row, &expect.p_bar.row(a).to_owned()));
        }
    }
    if m.is_fully_observed() {
        let mut dev = 0.0f64;
        for o_t in 0..m.n_obs {
            for a in 0..m.n_actions {
                let row = window_transition(m, pi, &WindowState::new(vec![o_t]), a, &prior);
                let row = match row {
                    Ok(row) => row,
                    Err(Error::ImpossibleEvidence { .. }) => continue,
                    Err(e) => return Err(e),
                };
                dev = dev.max(max_abs1(&row, &m.p.slice(ndarray::s![o_t, a, ..]).to_owned()));
            }
        }
        r.collapse = Some(dev);
    }
    Ok(r)
}
