//! History encoder: depthwise separable convolution over the `time × feature`
//! window, a linear lift of each time step to `d_model`, multi-head
//! self-attention across time steps, and average pooling over time.
//!
//! Windows are newest-first. After the convolution every time step carries
//! `C_out · D` features (all output channels of that row), which the
//! projection maps to the attention width.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::attention::AttentionCache;
use crate::nn::conv::ConvCache;
use crate::nn::linear::LinearCache;
use crate::nn::params::{join, Parameterized};
use crate::nn::pool::PoolCache;
use crate::nn::{AveragePool, DepthwiseSeparable, Layer, Linear, MultiHeadAttention};
use crate::tensor::Tensor;

pub const NORM_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub heads: usize,
    pub channels: usize,
    pub time_kernel: usize,
    pub obs_kernel: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            heads: 4,
            channels: 8,
            time_kernel: 3,
            obs_kernel: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryEncoder {
    pub conv: DepthwiseSeparable,
    pub projection: Linear,
    pub attention: MultiHeadAttention,
    /// Rows every window must have.
    window_rows: usize,
}

pub type EncoderParams = HistoryEncoder;

#[derive(Clone, Debug)]
pub struct EncoderCache {
    batched: bool,
    conv: ConvCache,
    projection: LinearCache,
    attention: AttentionCache,
    pool: PoolCache,
}

/// `[B, C, L, D] → [B, L, C·D]`.
fn channels_last(x: &[f64], b: usize, c: usize, l: usize, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for s in 0..b {
        for ch in 0..c {
            for t in 0..l {
                let src = ((s * c + ch) * l + t) * d;
                let dst = ((s * l + t) * c + ch) * d;
                out[dst..dst + d].copy_from_slice(&x[src..src + d]);
            }
        }
    }
    out
}

/// Inverse of [`channels_last`].
fn channels_first(x: &[f64], b: usize, c: usize, l: usize, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for s in 0..b {
        for ch in 0..c {
            for t in 0..l {
                let dst = ((s * c + ch) * l + t) * d;
                let src = ((s * l + t) * c + ch) * d;
                out[dst..dst + d].copy_from_slice(&x[src..src + d]);
            }
        }
    }
    out
}

impl HistoryEncoder {
    pub fn new(
        config: &EncoderConfig,
        window_rows: usize,
        feature_dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if window_rows == 0 || feature_dim == 0 {
            return Err(Error::Config("encoder needs at least one row and one feature".into()));
        }
        let conv = DepthwiseSeparable::new(
            config.channels,
            config.channels,
            config.time_kernel,
            config.obs_kernel,
            rng,
        )?;
        conv.check_extent(window_rows, feature_dim)?;
        let projection = Linear::new(config.channels * feature_dim, config.d_model, rng);
        let attention = MultiHeadAttention::new(config.d_model, config.heads, rng)?;
        Ok(Self {
            conv,
            projection,
            attention,
            window_rows,
        })
    }

    pub fn from_parts(
        conv: DepthwiseSeparable,
        projection: Linear,
        attention: MultiHeadAttention,
        window_rows: usize,
    ) -> Result<Self> {
        if projection.out_dim() != attention.d_model() {
            return Err(Error::Config(format!(
                "projection width {} differs from attention width {}",
                projection.out_dim(),
                attention.d_model()
            )));
        }
        if projection.in_dim() % conv.out_channels() != 0 {
            return Err(Error::Config("projection input is not a multiple of conv channels".into()));
        }
        conv.check_extent(window_rows, projection.in_dim() / conv.out_channels())?;
        Ok(Self {
            conv,
            projection,
            attention,
            window_rows,
        })
    }

    pub fn window_rows(&self) -> usize {
        self.window_rows
    }

    pub fn feature_dim(&self) -> usize {
        self.projection.in_dim() / self.conv.out_channels()
    }

    pub fn d_model(&self) -> usize {
        self.attention.d_model()
    }

    /// `[L, D] → [d_model]` or `[B, L, D] → [B, d_model]`.
    pub fn encode(&self, window: &Tensor) -> Result<Tensor> {
        self.forward(window).map(|(h, _)| h)
    }

    fn geometry(&self, x: &Tensor) -> Result<(usize, usize, usize, bool)> {
        let (b, l, d, batched) = match *x.shape() {
            [l, d] => (1, l, d, false),
            [b, l, d] => (b, l, d, true),
            ref s => return Err(Error::dim("history encoder", format!("expected [L, D] or [B, L, D], got {s:?}"))),
        };
        if l != self.window_rows {
            return Err(Error::dim(
                "history encoder",
                format!("window has {l} rows, encoder configured for {}", self.window_rows),
            ));
        }
        if d != self.feature_dim() {
            return Err(Error::dim(
                "history encoder",
                format!("window has {d} features, encoder configured for {}", self.feature_dim()),
            ));
        }
        Ok((b, l, d, batched))
    }
}

impl Layer for HistoryEncoder {
    type Cache = EncoderCache;
    type Grad = HistoryEncoder;

    fn forward(&self, x: &Tensor) -> Result<(Tensor, EncoderCache)> {
        let (b, l, d, batched) = self.geometry(x)?;
        let c = self.conv.out_channels();
        let xb = x.clone().reshape([b, l, d])?;
        let (z, conv) = self.conv.forward(&xb)?;
        let tokens = Tensor::new([b, l, c * d], channels_last(z.data(), b, c, l, d))?;
        let (p, projection) = Layer::forward(&self.projection, &tokens)?;
        let (a, attention) = self.attention.forward(&p)?;
        let (h, pool) = AveragePool.forward(&a)?;
        let h = if batched { h } else { h.reshape([self.d_model()])? };
        Ok((
            h,
            EncoderCache {
                batched,
                conv,
                projection,
                attention,
                pool,
            },
        ))
    }

    fn backward(&self, cache: &EncoderCache, dy: &Tensor) -> Result<(HistoryEncoder, Tensor)> {
        let dm = self.d_model();
        if dy.last_dim() != dm || dy.ndim() != if cache.batched { 2 } else { 1 } {
            return Err(Error::State(format!(
                "history encoder: output gradient {:?} does not match the cached pass",
                dy.shape()
            )));
        }
        let b = dy.len() / dm;
        let (l, d, c) = (self.window_rows, self.feature_dim(), self.conv.out_channels());
        let dy = dy.clone().reshape([b, dm])?;
        let (_, da) = AveragePool.backward(&cache.pool, &dy)?;
        let (g_attention, dp) = self.attention.backward(&cache.attention, &da)?;
        let (g_projection, dtokens) = self.projection.backward(&cache.projection, &dp)?;
        let dz = Tensor::new([b, c, l, d], channels_first(dtokens.data(), b, c, l, d))?;
        let (g_conv, dx) = self.conv.backward(&cache.conv, &dz)?;
        let dx = if cache.batched { dx } else { dx.reshape([l, d])? };
        Ok((
            HistoryEncoder {
                conv: g_conv,
                projection: g_projection,
                attention: g_attention,
                window_rows: self.window_rows,
            },
            dx,
        ))
    }
}

impl Parameterized for HistoryEncoder {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.conv.visit(&join(prefix, "conv"), f);
        self.projection.visit(&join(prefix, "projection"), f);
        self.attention.visit(&join(prefix, "attention"), f);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Tensor)) {
        self.conv.visit_mut(&join(prefix, "conv"), f);
        self.projection.visit_mut(&join(prefix, "projection"), f);
        self.attention.visit_mut(&join(prefix, "attention"), f);
    }
}

/// Root-mean-square normalization over the last axis:
/// `y = x / sqrt(mean(x²) + 1e-5)`, applied to every row.
pub fn pool_normalize(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    let d = x.last_dim();
    for row in y.data_mut().chunks_mut(d) {
        let ms = row.iter().map(|v| v * v).sum::<f64>() / d as f64;
        let r = 1.0 / (ms + NORM_EPS).sqrt();
        row.iter_mut().for_each(|v| *v *= r);
    }
    y
}

/// Input gradient of [`pool_normalize`] at `x`.
pub fn pool_normalize_backward(x: &Tensor, dy: &Tensor) -> Result<Tensor> {
    if x.shape() != dy.shape() {
        return Err(Error::State(format!(
            "pool_normalize: input {:?} vs output gradient {:?}",
            x.shape(),
            dy.shape()
        )));
    }
    let d = x.last_dim();
    let mut dx = x.zeros_like();
    for ((xr, gr), out) in x
        .data()
        .chunks(d)
        .zip(dy.data().chunks(d))
        .zip(dx.data_mut().chunks_mut(d))
    {
        let ms = xr.iter().map(|v| v * v).sum::<f64>() / d as f64;
        let r = 1.0 / (ms + NORM_EPS).sqrt();
        let dot: f64 = xr.iter().zip(gr).map(|(a, b)| a * b).sum();
        let k = r * r * r * dot / d as f64;
        for ((o, &xi), &gi) in out.iter_mut().zip(xr).zip(gr) {
            *o = r * gi - k * xi;
        }
    }
    Ok(dx)
}

/// [`pool_normalize`] as a layer.
#[derive(Clone, Copy, Debug, Default)]
pub struct PoolNormalize;

impl Layer for PoolNormalize {
    type Cache = Tensor;
    type Grad = ();

    fn forward(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        Ok((pool_normalize(x), x.clone()))
    }

    fn backward(&self, cache: &Tensor, dy: &Tensor) -> Result<((), Tensor)> {
        Ok(((), pool_normalize_backward(cache, dy)?))
    }
}
