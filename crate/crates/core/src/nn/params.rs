//! Named parameter collections.
//!
//! Every network exposes its tensors through [`Parameterized`], which yields
//! `(dotted.name, tensor)` pairs in a fixed order. Gradient containers reuse
//! the parameter types, so optimizers, soft updates and checkpoints can walk
//! two collections in lockstep.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

pub trait Parameterized {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor));

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Tensor));

    fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.visit("", &mut |name, t| out.push((name, t)));
        out
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        self.visit_mut("", &mut |name, t| out.push((name, t)));
        out
    }

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, t| n += t.len());
        n
    }

    fn to_network_params(&self) -> NetworkParams {
        let mut p = NetworkParams::default();
        self.visit("", &mut |name, t| p.entries.push((name, t.clone())));
        p
    }

    /// Overwrites every tensor from `params`; names and shapes must agree.
    fn load_network_params(&mut self, params: &NetworkParams) -> Result<()> {
        let mut mine = self.named_params_mut();
        check_structure(
            mine.iter().map(|(n, t)| (n.as_str(), t.shape())),
            params.entries.iter().map(|(n, t)| (n.as_str(), t.shape())),
        )?;
        for ((_, dst), (_, src)) in mine.iter_mut().zip(&params.entries) {
            dst.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }

    fn zeros_like(&self) -> Self
    where
        Self: Clone + Sized,
    {
        let mut z = self.clone();
        z.visit_mut("", &mut |_, t| t.fill(0.0));
        z
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit("", &mut |_, t| ok &= t.is_finite());
        ok
    }
}

/// Verifies two `(name, shape)` sequences are identical.
pub(crate) fn check_structure<'a, 'b>(
    left: impl ExactSizeIterator<Item = (&'a str, &'a [usize])>,
    right: impl ExactSizeIterator<Item = (&'b str, &'b [usize])>,
) -> Result<()> {
    if left.len() != right.len() {
        return Err(Error::Structure(format!(
            "{} tensors vs {} tensors",
            left.len(),
            right.len()
        )));
    }
    for ((ln, ls), (rn, rs)) in left.zip(right) {
        if ln != rn {
            return Err(Error::Structure(format!("name `{ln}` vs `{rn}`")));
        }
        if ls != rs {
            return Err(Error::Structure(format!("`{ln}` shape {ls:?} vs {rs:?}")));
        }
    }
    Ok(())
}

/// Flat, ordered snapshot of named tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NetworkParams {
    entries: Vec<(String, Tensor)>,
}

impl NetworkParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(Error::Structure(format!("duplicate tensor name `{name}`")));
        }
        self.entries.push((name, tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    /// Prefixes every name with `prefix.` and appends the result.
    pub fn extend_prefixed(&mut self, prefix: &str, other: NetworkParams) -> Result<()> {
        for (n, t) in other.entries {
            self.insert(join(prefix, &n), t)?;
        }
        Ok(())
    }

    /// Sub-collection of names starting with `prefix.`, with the prefix stripped.
    pub fn scoped(&self, prefix: &str) -> NetworkParams {
        let lead = format!("{prefix}.");
        NetworkParams {
            entries: self
                .entries
                .iter()
                .filter_map(|(n, t)| n.strip_prefix(&lead).map(|s| (s.to_string(), t.clone())))
                .collect(),
        }
    }
}

impl Parameterized for NetworkParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        for (n, t) in &self.entries {
            f(join(prefix, n), t);
        }
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Tensor)) {
        for (n, t) in &mut self.entries {
            f(join(prefix, n), t);
        }
    }
}

/// Total scalar count across all named tensors.
pub fn param_count(params: &impl Parameterized) -> usize {
    params.param_count()
}

/// Polyak averaging: `target ← τ·online + (1−τ)·target`.
pub fn soft_update<T: Parameterized + ?Sized, O: Parameterized + ?Sized>(
    target: &mut T,
    online: &O,
    tau: f64,
) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Config(format!("soft update rate {tau} outside (0, 1]")));
    }
    let src = online.named_params();
    let mut dst = target.named_params_mut();
    check_structure(
        dst.iter().map(|(n, t)| (n.as_str(), t.shape())),
        src.iter().map(|(n, t)| (n.as_str(), t.shape())),
    )?;
    for ((_, d), (_, s)) in dst.iter_mut().zip(&src) {
        if tau == 1.0 {
            d.data_mut().copy_from_slice(s.data());
        } else {
            for (dv, sv) in d.data_mut().iter_mut().zip(s.data()) {
                *dv = tau * sv + (1.0 - tau) * *dv;
            }
        }
    }
    Ok(())
}
