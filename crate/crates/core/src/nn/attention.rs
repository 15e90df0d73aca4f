//! Multi-head scaled dot-product self-attention.
//!
//! Queries, keys and values are all projected from the same input. Each head
//! works on a `d_k = d_model / heads` slice of the projections; head outputs
//! are concatenated and mixed by `W_o`. Projections carry no bias.

use rand::Rng;

use super::params::{join, Parameterized};
use super::{uniform_init, Layer};
use crate::error::{Error, Result};
use crate::tensor::{gemm, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct MultiHeadAttention {
    pub num_heads: usize,
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
    pub w_o: Tensor,
}

pub type AttentionParams = MultiHeadAttention;

#[derive(Clone, Debug)]
pub struct AttentionCache {
    input: Tensor,
    batch: usize,
    seq: usize,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// `[B, H, L, L]` softmax weights.
    probs: Vec<f64>,
    concat: Vec<f64>,
}

impl AttentionCache {
    /// Softmax weights as `[B, H, L, L]`.
    pub fn weights(&self, heads: usize) -> Tensor {
        Tensor::new(vec![self.batch, heads, self.seq, self.seq], self.probs.clone())
            .expect("cached attention weights")
    }
}

/// Row-wise numerically stable softmax, in place.
pub fn softmax_rows(values: &mut [f64], cols: usize) {
    for row in values.chunks_mut(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
}

impl MultiHeadAttention {
    pub fn new(d_model: usize, num_heads: usize, rng: &mut impl Rng) -> Result<Self> {
        let layer = Self {
            num_heads,
            w_q: uniform_init(&[d_model, d_model], d_model, rng),
            w_k: uniform_init(&[d_model, d_model], d_model, rng),
            w_v: uniform_init(&[d_model, d_model], d_model, rng),
            w_o: uniform_init(&[d_model, d_model], d_model, rng),
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn d_model(&self) -> usize {
        self.w_q.shape()[0]
    }

    pub fn d_k(&self) -> usize {
        self.d_model() / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d_model();
        if self.num_heads == 0 || d % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {d} not divisible by {} heads",
                self.num_heads
            )));
        }
        for w in [&self.w_q, &self.w_k, &self.w_v, &self.w_o] {
            if w.shape() != [d, d] {
                return Err(Error::Config(format!(
                    "attention projection {:?} is not {d}×{d}",
                    w.shape()
                )));
            }
        }
        Ok(())
    }

    fn geometry(&self, x: &Tensor) -> Result<(usize, usize)> {
        self.validate()?;
        let (b, l, d) = match *x.shape() {
            [l, d] => (1, l, d),
            [b, l, d] => (b, l, d),
            _ => {
                return Err(Error::dim(
                    "attention",
                    format!("expected [L, d] or [B, L, d], got {:?}", x.shape()),
                ))
            }
        };
        if d != self.d_model() {
            return Err(Error::dim(
                "attention",
                format!("input width {d}, d_model {}", self.d_model()),
            ));
        }
        Ok((b, l))
    }

    fn project(&self, x: &[f64], rows: usize, w: &Tensor) -> Vec<f64> {
        let d = self.d_model();
        let mut out = vec![0.0; rows * d];
        gemm(x, (rows, d), false, w.data(), (d, d), true, &mut out, 0.0);
        out
    }
}

impl Layer for MultiHeadAttention {
    type Cache = AttentionCache;
    type Grad = MultiHeadAttention;

    fn forward(&self, x: &Tensor) -> Result<(Tensor, AttentionCache)> {
        let (b, l) = self.geometry(x)?;
        let (d, h, dk) = (self.d_model(), self.num_heads, self.d_k());
        let rows = b * l;
        let scale = 1.0 / (dk as f64).sqrt();
        let q = self.project(x.data(), rows, &self.w_q);
        let k = self.project(x.data(), rows, &self.w_k);
        let v = self.project(x.data(), rows, &self.w_v);
        let mut probs = vec![0.0; b * h * l * l];
        let mut concat = vec![0.0; rows * d];
        for s in 0..b {
            for head in 0..h {
                let col = head * dk;
                let p = &mut probs[(s * h + head) * l * l..(s * h + head + 1) * l * l];
                for i in 0..l {
                    let qi = &q[(s * l + i) * d + col..(s * l + i) * d + col + dk];
                    for j in 0..l {
                        let kj = &k[(s * l + j) * d + col..(s * l + j) * d + col + dk];
                        p[i * l + j] = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
                    }
                }
                softmax_rows(p, l);
                for i in 0..l {
                    let out = &mut concat[(s * l + i) * d + col..(s * l + i) * d + col + dk];
                    for j in 0..l {
                        let w = p[i * l + j];
                        let vj = &v[(s * l + j) * d + col..(s * l + j) * d + col + dk];
                        for (o, vv) in out.iter_mut().zip(vj) {
                            *o += w * vv;
                        }
                    }
                }
            }
        }
        let y = self.project(&concat, rows, &self.w_o);
        Ok((
            Tensor::new(x.shape().to_vec(), y)?,
            AttentionCache {
                input: x.clone(),
                batch: b,
                seq: l,
                q,
                k,
                v,
                probs,
                concat,
            },
        ))
    }

    fn backward(&self, cache: &AttentionCache, dy: &Tensor) -> Result<(MultiHeadAttention, Tensor)> {
        let (d, h, dk) = (self.d_model(), self.num_heads, self.d_k());
        let (b, l) = (cache.batch, cache.seq);
        let rows = b * l;
        if dy.len() != rows * d {
            return Err(Error::State(format!(
                "attention: cached input {:?} vs output gradient {:?}",
                cache.input.shape(),
                dy.shape()
            )));
        }
        let scale = 1.0 / (dk as f64).sqrt();
        let mut grad = self.zeros_like();
        gemm(dy.data(), (rows, d), true, &cache.concat, (rows, d), false, grad.w_o.data_mut(), 0.0);
        let mut dconcat = vec![0.0; rows * d];
        gemm(dy.data(), (rows, d), false, self.w_o.data(), (d, d), false, &mut dconcat, 0.0);

        let (q, k, v) = (&cache.q, &cache.k, &cache.v);
        let mut dq = vec![0.0; rows * d];
        let mut dk_ = vec![0.0; rows * d];
        let mut dv = vec![0.0; rows * d];
        let mut dp = vec![0.0; l * l];
        for s in 0..b {
            for head in 0..h {
                let col = head * dk;
                let p = &cache.probs[(s * h + head) * l * l..(s * h + head + 1) * l * l];
                let at = |r: usize| (s * l + r) * d + col;
                // dP = dA·Vᵀ, dV = Pᵀ·dA
                for i in 0..l {
                    let da = &dconcat[at(i)..at(i) + dk];
                    for j in 0..l {
                        let vj = &v[at(j)..at(j) + dk];
                        dp[i * l + j] = da.iter().zip(vj).map(|(a, b)| a * b).sum();
                        let w = p[i * l + j];
                        let o = at(j);
                        for (g, a) in dv[o..o + dk].iter_mut().zip(da) {
                            *g += w * a;
                        }
                    }
                }
                // Softmax Jacobian: dS = P ⊙ (dP − rowsum(dP ⊙ P)).
                for i in 0..l {
                    let dot: f64 = (0..l).map(|j| dp[i * l + j] * p[i * l + j]).sum();
                    for j in 0..l {
                        let ds = p[i * l + j] * (dp[i * l + j] - dot) * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        let (oi, oj) = (at(i), at(j));
                        for c in 0..dk {
                            dq[oi + c] += ds * k[oj + c];
                            dk_[oj + c] += ds * q[oi + c];
                        }
                    }
                }
            }
        }
        let x = cache.input.data();
        let mut dx = vec![0.0; rows * d];
        for (dproj, w, gw) in [
            (&dq, &self.w_q, &mut grad.w_q),
            (&dk_, &self.w_k, &mut grad.w_k),
            (&dv, &self.w_v, &mut grad.w_v),
        ] {
            gemm(dproj, (rows, d), true, x, (rows, d), false, gw.data_mut(), 0.0);
            gemm(dproj, (rows, d), false, w.data(), (d, d), false, &mut dx, 1.0);
        }
        Ok((grad, Tensor::new(cache.input.shape().to_vec(), dx)?))
    }
}

impl Parameterized for MultiHeadAttention {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "w_q"), &self.w_q);
        f(join(prefix, "w_k"), &self.w_k);
        f(join(prefix, "w_v"), &self.w_v);
        f(join(prefix, "w_o"), &self.w_o);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Tensor)) {
        f(join(prefix, "w_q"), &mut self.w_q);
        f(join(prefix, "w_k"), &mut self.w_k);
        f(join(prefix, "w_v"), &mut self.w_v);
        f(join(prefix, "w_o"), &mut self.w_o);
    }
}
