//! Depthwise separable convolution over a `time × feature` history matrix.
//!
//! A single input plane is filtered by `C` depthwise channels. Each channel
//! owns a 1-D kernel along the time axis and a 1-D kernel along the feature
//! axis; the two are applied one after the other (a rank-1 2-D kernel), with
//! zero same-padding so the plane keeps its `T × D` extent. A 1×1 pointwise
//! convolution then mixes the `C` channels into `C_out` output channels.

use rand::Rng;

use super::params::{join, Parameterized};
use super::{uniform_init, Layer};
use crate::error::{Error, Result};
use crate::tensor::{gemm, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct DepthwiseSeparable {
    /// `[C × k_t]`
    pub time_kernel: Tensor,
    /// `[C × k_o]`
    pub obs_kernel: Tensor,
    /// `[C_out × C]`
    pub pointwise_weight: Tensor,
    /// `[C_out]`
    pub pointwise_bias: Tensor,
}

pub type DepthwiseSeparableParams = DepthwiseSeparable;

#[derive(Clone, Debug)]
pub struct ConvCache {
    input: Tensor,
    /// After the time-axis pass, `[B, C, T, D]` flattened.
    after_time: Vec<f64>,
    /// After both depthwise passes, `[B, C, T, D]` flattened.
    depthwise: Vec<f64>,
}

/// Same-padded 1-D cross-correlation along a strided axis.
///
/// Reads `len` elements of `src` spaced by `stride`, writes into `dst` with the
/// same layout.
fn correlate(src: &[f64], dst: &mut [f64], len: usize, stride: usize, kernel: &[f64]) {
    let r = (kernel.len() / 2) as isize;
    for i in 0..len {
        let mut acc = 0.0;
        for (j, &k) in kernel.iter().enumerate() {
            let s = i as isize + j as isize - r;
            if s >= 0 && (s as usize) < len {
                acc += k * src[s as usize * stride];
            }
        }
        dst[i * stride] = acc;
    }
}

/// Adjoint of [`correlate`]: accumulates kernel and input gradients.
fn correlate_backward(
    src: &[f64],
    dy: &[f64],
    dsrc: &mut [f64],
    dkernel: &mut [f64],
    len: usize,
    stride: usize,
    kernel: &[f64],
) {
    let r = (kernel.len() / 2) as isize;
    for i in 0..len {
        let g = dy[i * stride];
        if g == 0.0 {
            continue;
        }
        for (j, &k) in kernel.iter().enumerate() {
            let s = i as isize + j as isize - r;
            if s >= 0 && (s as usize) < len {
                let s = s as usize * stride;
                dkernel[j] += g * src[s];
                dsrc[s] += g * k;
            }
        }
    }
}

impl DepthwiseSeparable {
    pub fn new(
        channels: usize,
        out_channels: usize,
        time_kernel: usize,
        obs_kernel: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let layer = Self {
            time_kernel: uniform_init(&[channels, time_kernel], time_kernel, rng),
            obs_kernel: uniform_init(&[channels, obs_kernel], obs_kernel, rng),
            pointwise_weight: uniform_init(&[out_channels, channels], channels, rng),
            pointwise_bias: Tensor::zeros(&[out_channels]),
        };
        layer.validate()?;
        Ok(layer)
    }

    /// Delta kernels on both axes and an identity pointwise mix.
    pub fn identity(channels: usize, time_kernel: usize, obs_kernel: usize) -> Result<Self> {
        let delta = |k: usize| {
            let mut t = Tensor::zeros(&[channels, k]);
            for c in 0..channels {
                t.data_mut()[c * k + k / 2] = 1.0;
            }
            t
        };
        let mut eye = Tensor::zeros(&[channels, channels]);
        for c in 0..channels {
            eye.data_mut()[c * channels + c] = 1.0;
        }
        let layer = Self {
            time_kernel: delta(time_kernel),
            obs_kernel: delta(obs_kernel),
            pointwise_weight: eye,
            pointwise_bias: Tensor::zeros(&[channels]),
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn channels(&self) -> usize {
        self.time_kernel.shape()[0]
    }

    pub fn out_channels(&self) -> usize {
        self.pointwise_weight.shape()[0]
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels();
        let (kt, ko) = (self.time_kernel.shape()[1], self.obs_kernel.shape()[1]);
        if kt % 2 == 0 || ko % 2 == 0 {
            return Err(Error::Config(format!(
                "depthwise kernel lengths must be odd, got time {kt} / obs {ko}"
            )));
        }
        if self.obs_kernel.shape()[0] != c
            || self.pointwise_weight.shape()[1] != c
            || self.pointwise_bias.shape() != [self.out_channels()]
        {
            return Err(Error::Config("depthwise separable parameter shapes disagree".into()));
        }
        Ok(())
    }

    fn geometry(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        let (b, t, d) = match *x.shape() {
            [t, d] => (1, t, d),
            [b, t, d] => (b, t, d),
            _ => {
                return Err(Error::dim(
                    "depthwise separable conv",
                    format!("expected [T, D] or [B, T, D], got {:?}", x.shape()),
                ))
            }
        };
        self.check_extent(t, d)?;
        Ok((b, t, d))
    }

    /// Rejects kernels longer than a same-padded `t × d` plane.
    pub fn check_extent(&self, t: usize, d: usize) -> Result<()> {
        let (kt, ko) = (self.time_kernel.shape()[1], self.obs_kernel.shape()[1]);
        // A same-padded axis of length n spans 2n+1 kernel taps at most.
        if kt > 2 * t + 1 || ko > 2 * d + 1 {
            return Err(Error::Config(format!(
                "kernel (time {kt}, obs {ko}) longer than padded axes (time {t}, obs {d})"
            )));
        }
        Ok(())
    }
}

impl Layer for DepthwiseSeparable {
    type Cache = ConvCache;
    type Grad = DepthwiseSeparable;

    fn forward(&self, x: &Tensor) -> Result<(Tensor, ConvCache)> {
        let (b, t, d) = self.geometry(x)?;
        let (c, co) = (self.channels(), self.out_channels());
        let (kt, ko) = (self.time_kernel.shape()[1], self.obs_kernel.shape()[1]);
        let plane = t * d;
        let mut after_time = vec![0.0; b * c * plane];
        let mut depthwise = vec![0.0; b * c * plane];
        let mut out = vec![0.0; b * co * plane];
        for s in 0..b {
            let xs = &x.data()[s * plane..(s + 1) * plane];
            for ch in 0..c {
                let off = (s * c + ch) * plane;
                let kt_c = &self.time_kernel.data()[ch * kt..(ch + 1) * kt];
                let ko_c = &self.obs_kernel.data()[ch * ko..(ch + 1) * ko];
                let z1 = &mut after_time[off..off + plane];
                for col in 0..d {
                    correlate(&xs[col..], &mut z1[col..], t, d, kt_c);
                }
                let z2 = &mut depthwise[off..off + plane];
                for row in 0..t {
                    correlate(&z1[row * d..], &mut z2[row * d..], d, 1, ko_c);
                }
            }
            let o = &mut out[s * co * plane..(s + 1) * co * plane];
            for (oc, chunk) in o.chunks_mut(plane).enumerate() {
                chunk.fill(self.pointwise_bias.data()[oc]);
            }
            gemm(
                self.pointwise_weight.data(),
                (co, c),
                false,
                &depthwise[s * c * plane..(s + 1) * c * plane],
                (c, plane),
                false,
                o,
                1.0,
            );
        }
        let shape = if x.ndim() == 2 { vec![co, t, d] } else { vec![b, co, t, d] };
        Ok((
            Tensor::new(shape, out)?,
            ConvCache {
                input: x.clone(),
                after_time,
                depthwise,
            },
        ))
    }

    fn backward(&self, cache: &ConvCache, dy: &Tensor) -> Result<(DepthwiseSeparable, Tensor)> {
        let x = &cache.input;
        let (b, t, d) = self.geometry(x)?;
        let (c, co) = (self.channels(), self.out_channels());
        let (kt, ko) = (self.time_kernel.shape()[1], self.obs_kernel.shape()[1]);
        let plane = t * d;
        if dy.len() != b * co * plane {
            return Err(Error::State(format!(
                "depthwise separable conv: cached input {:?} vs output gradient {:?}",
                x.shape(),
                dy.shape()
            )));
        }
        let mut grad = self.zeros_like();
        let mut dx = vec![0.0; b * plane];
        let mut dz2 = vec![0.0; c * plane];
        let mut dz1 = vec![0.0; c * plane];
        for s in 0..b {
            let dys = &dy.data()[s * co * plane..(s + 1) * co * plane];
            let z2 = &cache.depthwise[s * c * plane..(s + 1) * c * plane];
            // pointwise: dW += dY·Z2ᵀ, dZ2 = Wᵀ·dY
            gemm(dys, (co, plane), false, z2, (c, plane), true, grad.pointwise_weight.data_mut(), 1.0);
            for (oc, chunk) in dys.chunks(plane).enumerate() {
                grad.pointwise_bias.data_mut()[oc] += chunk.iter().sum::<f64>();
            }
            gemm(self.pointwise_weight.data(), (co, c), true, dys, (co, plane), false, &mut dz2, 0.0);

            dz1.fill(0.0);
            let xs = &x.data()[s * plane..(s + 1) * plane];
            let dxs = &mut dx[s * plane..(s + 1) * plane];
            for ch in 0..c {
                let off = (s * c + ch) * plane;
                let z1 = &cache.after_time[off..off + plane];
                let g2 = &dz2[ch * plane..(ch + 1) * plane];
                let g1 = &mut dz1[ch * plane..(ch + 1) * plane];
                let ko_c = &self.obs_kernel.data()[ch * ko..(ch + 1) * ko];
                let dko = &mut grad.obs_kernel.data_mut()[ch * ko..(ch + 1) * ko];
                for row in 0..t {
                    let r = row * d;
                    correlate_backward(&z1[r..], &g2[r..], &mut g1[r..], dko, d, 1, ko_c);
                }
                let kt_c = &self.time_kernel.data()[ch * kt..(ch + 1) * kt];
                let dkt = &mut grad.time_kernel.data_mut()[ch * kt..(ch + 1) * kt];
                for col in 0..d {
                    correlate_backward(&xs[col..], &g1[col..], &mut dxs[col..], dkt, t, d, kt_c);
                }
            }
        }
        Ok((grad, Tensor::new(x.shape().to_vec(), dx)?))
    }
}

impl Parameterized for DepthwiseSeparable {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "time_kernel"), &self.time_kernel);
        f(join(prefix, "obs_kernel"), &self.obs_kernel);
        f(join(prefix, "pointwise_weight"), &self.pointwise_weight);
        f(join(prefix, "pointwise_bias"), &self.pointwise_bias);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Tensor)) {
        f(join(prefix, "time_kernel"), &mut self.time_kernel);
        f(join(prefix, "obs_kernel"), &mut self.obs_kernel);
        f(join(prefix, "pointwise_weight"), &mut self.pointwise_weight);
        f(join(prefix, "pointwise_bias"), &mut self.pointwise_bias);
    }
}
