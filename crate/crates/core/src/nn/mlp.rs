use rand::Rng;

use super::activation::Relu;
use super::linear::{Linear, LinearCache};
use super::params::{join, Parameterized};
use super::Layer;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Linear layers with ReLU between them; the last layer is left linear.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

#[derive(Clone, Debug)]
pub struct MlpCache {
    linear: Vec<LinearCache>,
    /// Pre-activation of every hidden layer.
    hidden: Vec<Tensor>,
}

impl MlpCache {
    /// Smallest `|z|` over every hidden pre-activation. A finite-difference
    /// check is only meaningful when this exceeds the probe step.
    pub fn relu_margin(&self) -> f64 {
        self.hidden
            .iter()
            .flat_map(|t| t.data().iter().map(|z| z.abs()))
            .fold(f64::INFINITY, f64::min)
    }
}

impl Mlp {
    /// `widths = [in, h1, …, out]`.
    pub fn new(widths: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Config(format!("invalid MLP widths {widths:?}")));
        }
        Ok(Self {
            layers: widths.windows(2).map(|w| Linear::new(w[0], w[1], rng)).collect(),
        })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty MLP").out_dim()
    }

    /// Zeroes the output layer so the network emits its bias (zero) everywhere.
    pub fn zero_head(&mut self) {
        let last = self.layers.last_mut().expect("non-empty MLP");
        last.weight.fill(0.0);
        last.bias.fill(0.0);
    }
}

impl Layer for Mlp {
    type Cache = MlpCache;
    type Grad = Mlp;

    fn forward(&self, x: &Tensor) -> Result<(Tensor, MlpCache)> {
        let n = self.layers.len();
        let mut linear = Vec::with_capacity(n);
        let mut hidden = Vec::with_capacity(n - 1);
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let (z, c) = Layer::forward(layer, &h)?;
            linear.push(c);
            if i + 1 < n {
                let (a, _) = Relu.forward(&z)?;
                hidden.push(z);
                h = a;
            } else {
                h = z;
            }
        }
        Ok((h, MlpCache { linear, hidden }))
    }

    fn backward(&self, cache: &MlpCache, dy: &Tensor) -> Result<(Mlp, Tensor)> {
        if cache.linear.len() != self.layers.len() {
            return Err(Error::State("MLP cache depth does not match the network".into()));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = dy.clone();
        for i in (0..self.layers.len()).rev() {
            let (lg, dx) = self.layers[i].backward(&cache.linear[i], &g)?;
            grads.push(lg);
            g = if i > 0 {
                Relu.backward(&cache.hidden[i - 1], &dx)?.1
            } else {
                dx
            };
        }
        grads.reverse();
        Ok((Mlp { layers: grads }, g))
    }
}

impl Parameterized for Mlp {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        for (i, l) in self.layers.iter().enumerate() {
            l.visit(&join(prefix, &i.to_string()), f);
        }
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Tensor)) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.visit_mut(&join(prefix, &i.to_string()), f);
        }
    }
}
