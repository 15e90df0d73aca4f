//! Actor and critic networks for every variant.
//!
//! Both networks assemble an MLP input from named pieces of the observation
//! window `s̄ = [o_t, …, o_{t−N}]` and action window `ā = [a_t, …, a_{t−N}]`
//! (newest row first). Encoders see the past rows `1..=N` only; the current
//! row enters the MLP directly.

use rand::Rng;

use super::config::{AgentConfig, InputNorm, Variant};
use crate::encoder::{pool_normalize, pool_normalize_backward, EncoderCache, HistoryEncoder};
use crate::error::{Error, Result};
use crate::nn::mlp::MlpCache;
use crate::nn::params::{join, Parameterized};
use crate::nn::{Layer, Mlp};
use crate::tensor::Tensor;

/// Problem sizes shared by every network of an agent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dims {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub history_len: usize,
    pub action_bound: f64,
}

impl Dims {
    pub fn rows(&self) -> usize {
        self.history_len + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Piece {
    /// `o_t`
    ObsNow,
    /// `a_t`
    ActNow,
    /// every row of `s̄`, flattened
    ObsFlat,
    /// every row of `ā`, flattened
    ActFlat,
    /// observation encoder over past rows
    ObsEnc,
    /// action encoder over past rows
    ActEnc,
    /// externally computed features (the shared encoder)
    Shared,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InputLayout {
    pub pieces: Vec<(Piece, usize)>,
    pub norm: InputNorm,
}

#[derive(Clone, Debug)]
pub struct InputCache {
    parts: Vec<Tensor>,
    joint: Option<Tensor>,
}

/// `[B, R, F] → [B, F]` for row `r`.
pub fn window_row(w: &Tensor, r: usize) -> Tensor {
    let (b, rows, f) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    let mut out = Vec::with_capacity(b * f);
    for s in 0..b {
        let start = (s * rows + r) * f;
        out.extend_from_slice(&w.data()[start..start + f]);
    }
    Tensor::new([b, f], out).expect("row shape")
}

/// `[B, R, F] → [B, R·F]`.
pub fn flatten_window(w: &Tensor) -> Tensor {
    let (b, rest) = (w.shape()[0], w.len() / w.shape()[0]);
    w.clone().reshape([b, rest]).expect("flatten")
}

fn concat_cols(parts: &[Tensor]) -> Result<Tensor> {
    let b = parts[0].shape()[0];
    let width: usize = parts.iter().map(|p| p.last_dim()).sum();
    let mut out = Vec::with_capacity(b * width);
    for s in 0..b {
        for p in parts {
            out.extend_from_slice(p.row(s));
        }
    }
    Tensor::new([b, width], out)
}

fn split_cols(x: &Tensor, widths: &[usize]) -> Result<Vec<Tensor>> {
    let b = x.rows();
    let mut outs: Vec<Vec<f64>> = widths.iter().map(|w| Vec::with_capacity(b * w)).collect();
    for s in 0..b {
        let mut off = 0;
        for (o, &w) in outs.iter_mut().zip(widths) {
            o.extend_from_slice(&x.row(s)[off..off + w]);
            off += w;
        }
    }
    outs.into_iter().zip(widths).map(|(o, &w)| Tensor::new([b, w], o)).collect()
}

impl InputLayout {
    pub fn width(&self) -> usize {
        self.pieces.iter().map(|(_, w)| w).sum()
    }

    pub fn has(&self, piece: Piece) -> bool {
        self.pieces.iter().any(|(p, _)| *p == piece)
    }

    fn normalizes(&self, piece: Piece) -> bool {
        match self.norm {
            InputNorm::Current => matches!(piece, Piece::ObsNow | Piece::ActNow),
            InputNorm::Encoded => matches!(piece, Piece::ObsEnc | Piece::ActEnc | Piece::Shared),
            _ => false,
        }
    }

    fn forward(&self, parts: Vec<Tensor>) -> Result<(Tensor, InputCache)> {
        for ((piece, w), p) in self.pieces.iter().zip(&parts) {
            if p.last_dim() != *w {
                return Err(Error::dim("network input", format!("{piece:?} has width {}, expected {w}", p.last_dim())));
            }
        }
        let shown: Vec<Tensor> = self
            .pieces
            .iter()
            .zip(&parts)
            .map(|((piece, _), p)| if self.normalizes(*piece) { pool_normalize(p) } else { p.clone() })
            .collect();
        let x = concat_cols(&shown)?;
        let (x, joint) = match self.norm {
            InputNorm::Joint => (pool_normalize(&x), Some(x)),
            _ => (x, None),
        };
        Ok((x, InputCache { parts, joint }))
    }

    fn backward(&self, cache: &InputCache, dx: &Tensor) -> Result<Vec<Tensor>> {
        let dx = match &cache.joint {
            Some(x) => pool_normalize_backward(x, dx)?,
            None => dx.clone(),
        };
        let widths: Vec<usize> = self.pieces.iter().map(|(_, w)| *w).collect();
        let grads = split_cols(&dx, &widths)?;
        self.pieces
            .iter()
            .zip(grads)
            .zip(&cache.parts)
            .map(|(((piece, _), g), raw)| {
                if self.normalizes(*piece) {
                    pool_normalize_backward(raw, &g)
                } else {
                    Ok(g)
                }
            })
            .collect()
    }
}

fn past_rows(w: &Tensor) -> Result<Tensor> {
    w.slice_axis1(1, w.shape()[1])
}

fn check_window(w: &Tensor, rows: usize, features: usize, what: &str) -> Result<()> {
    if w.ndim() != 3 || w.shape()[1] != rows || w.shape()[2] != features {
        return Err(Error::dim(
            what.to_string(),
            format!("expected [B, {rows}, {features}], got {:?}", w.shape()),
        ));
    }
    Ok(())
}

fn mlp_widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

fn norm_for(variant: Variant, configured: InputNorm) -> InputNorm {
    match variant {
        Variant::Td3 | Variant::Fwtd3 => InputNorm::None,
        _ => configured,
    }
}

// ---------------------------------------------------------------- actor

#[derive(Clone, Debug, PartialEq)]
pub struct Actor {
    pub encoder: Option<HistoryEncoder>,
    pub mlp: Mlp,
    pub layout: InputLayout,
    dims: Dims,
    outputs: usize,
}

#[derive(Clone, Debug)]
pub struct ActorCache {
    encoder: Option<EncoderCache>,
    input: InputCache,
    mlp: MlpCache,
    /// `tanh` output before scaling by the bound.
    squashed: Tensor,
}

impl ActorCache {
    pub fn relu_margin(&self) -> f64 {
        self.mlp.relu_margin()
    }
}

impl Actor {
    pub fn new(config: &AgentConfig, dims: Dims, rng: &mut impl Rng) -> Result<Self> {
        let n = dims.history_len;
        let d = config.encoder.d_model;
        let v = config.variant;
        let mut pieces = Vec::new();
        let mut encoder = None;
        match v {
            Variant::Td3 => pieces.push((Piece::ObsNow, dims.obs_dim)),
            Variant::Fwtd3 => pieces.push((Piece::ObsFlat, dims.rows() * dims.obs_dim)),
            Variant::V1 => {
                pieces.push((Piece::ObsNow, dims.obs_dim));
                if n > 0 {
                    pieces.push((Piece::Shared, d));
                }
            }
            Variant::Cae | Variant::CaeFo | Variant::V2 | Variant::V3 => {
                pieces.push((Piece::ObsNow, dims.obs_dim));
                if n > 0 {
                    encoder = Some(HistoryEncoder::new(&config.encoder, n, dims.obs_dim, rng)?);
                    pieces.push((Piece::ObsEnc, d));
                }
            }
        }
        let layout = InputLayout {
            pieces,
            norm: norm_for(v, config.input_norm),
        };
        let outputs = v.actor_outputs(n);
        let mlp = Mlp::new(&mlp_widths(layout.width(), &config.hidden, outputs * dims.act_dim), rng)?;
        Ok(Self {
            encoder,
            mlp,
            layout,
            dims,
            outputs,
        })
    }

    /// Actions per call (`N + 1` for the sequence-emitting variant).
    pub fn outputs(&self) -> usize {
        self.outputs
    }

    /// `s̄: [B, N+1, obs]` → actions `[B, outputs·act]`, each within the bound.
    pub fn forward(&self, s_bar: &Tensor, shared: Option<&Tensor>) -> Result<(Tensor, ActorCache)> {
        check_window(s_bar, self.dims.rows(), self.dims.obs_dim, "actor observation window")?;
        let mut parts = Vec::with_capacity(self.layout.pieces.len());
        let mut enc_cache = None;
        for (piece, _) in &self.layout.pieces {
            parts.push(match piece {
                Piece::ObsNow => window_row(s_bar, 0),
                Piece::ObsFlat => flatten_window(s_bar),
                Piece::ObsEnc => {
                    let enc = self.encoder.as_ref().expect("encoder present with ObsEnc");
                    let (h, c) = enc.forward(&past_rows(s_bar)?)?;
                    enc_cache = Some(c);
                    h
                }
                Piece::Shared => shared
                    .ok_or_else(|| Error::Usage("actor needs shared encoder features".into()))?
                    .clone(),
                Piece::ActNow | Piece::ActFlat | Piece::ActEnc => unreachable!("actor has no action inputs"),
            });
        }
        let (x, input) = self.layout.forward(parts)?;
        let (z, mlp) = self.mlp.forward(&x)?;
        let squashed = z.map(f64::tanh);
        let a = squashed.map(|y| y * self.dims.action_bound);
        Ok((
            a,
            ActorCache {
                encoder: enc_cache,
                input,
                mlp,
                squashed,
            },
        ))
    }

    pub fn act(&self, s_bar: &Tensor, shared: Option<&Tensor>) -> Result<Tensor> {
        self.forward(s_bar, shared).map(|(a, _)| a)
    }

    /// Parameter gradients and, for shared features, their input gradient.
    pub fn backward(&self, cache: &ActorCache, da: &Tensor) -> Result<(Actor, Option<Tensor>)> {
        if da.shape() != cache.squashed.shape() {
            return Err(Error::State(format!(
                "actor: action gradient {:?} vs cached output {:?}",
                da.shape(),
                cache.squashed.shape()
            )));
        }
        let b = self.dims.action_bound;
        let mut dz = da.clone();
        for (g, &y) in dz.data_mut().iter_mut().zip(cache.squashed.data()) {
            *g *= b * (1.0 - y * y);
        }
        let (g_mlp, dx) = self.mlp.backward(&cache.mlp, &dz)?;
        let grads = self.layout.backward(&cache.input, &dx)?;
        let mut g_enc = None;
        let mut d_shared = None;
        for ((piece, _), g) in self.layout.pieces.iter().zip(grads) {
            match piece {
                Piece::ObsEnc => {
                    let enc = self.encoder.as_ref().expect("encoder present");
                    let c = cache.encoder.as_ref().ok_or_else(|| Error::State("actor encoder cache missing".into()))?;
                    g_enc = Some(enc.backward(c, &g)?.0);
                }
                Piece::Shared => d_shared = Some(g),
                _ => {}
            }
        }
        Ok((
            Actor {
                encoder: g_enc,
                mlp: g_mlp,
                layout: self.layout.clone(),
                dims: self.dims,
                outputs: self.outputs,
            },
            d_shared,
        ))
    }
}

impl Parameterized for Actor {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        if let Some(e) = &self.encoder {
            e.visit(&join(prefix, "obs_encoder"), f);
        }
        self.mlp.visit(&join(prefix, "mlp"), f);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Tensor)) {
        if let Some(e) = &mut self.encoder {
            e.visit_mut(&join(prefix, "obs_encoder"), f);
        }
        self.mlp.visit_mut(&join(prefix, "mlp"), f);
    }
}

// --------------------------------------------------------------- critic

#[derive(Clone, Debug, PartialEq)]
pub struct Critic {
    pub obs_encoder: Option<HistoryEncoder>,
    pub act_encoder: Option<HistoryEncoder>,
    pub mlp: Mlp,
    pub layout: InputLayout,
    dims: Dims,
}

#[derive(Clone, Debug)]
pub struct CriticCache {
    obs_encoder: Option<EncoderCache>,
    act_encoder: Option<EncoderCache>,
    input: InputCache,
    mlp: MlpCache,
}

impl CriticCache {
    pub fn relu_margin(&self) -> f64 {
        self.mlp.relu_margin()
    }
}

impl Critic {
    pub fn new(config: &AgentConfig, dims: Dims, rng: &mut impl Rng) -> Result<Self> {
        let n = dims.history_len;
        let d = config.encoder.d_model;
        let (o, a) = (dims.obs_dim, dims.act_dim);
        let mut obs_encoder = None;
        let mut act_encoder = None;
        let mut enc = |features: usize| HistoryEncoder::new(&config.encoder, n, features, &mut *rng);
        let pieces = match config.variant {
            Variant::Td3 => vec![(Piece::ObsNow, o), (Piece::ActNow, a)],
            Variant::Fwtd3 => vec![(Piece::ObsFlat, dims.rows() * o), (Piece::ActFlat, dims.rows() * a)],
            Variant::Cae => {
                let mut p = vec![(Piece::ObsNow, o), (Piece::ActNow, a)];
                if n > 0 {
                    obs_encoder = Some(enc(o)?);
                    act_encoder = Some(enc(a)?);
                    p.extend([(Piece::ObsEnc, d), (Piece::ActEnc, d)]);
                }
                p
            }
            Variant::CaeFo => {
                let mut p = vec![(Piece::ObsNow, o), (Piece::ActNow, a)];
                if n > 0 {
                    obs_encoder = Some(enc(o)?);
                    p.push((Piece::ObsEnc, d));
                }
                p
            }
            Variant::V1 => {
                let mut p = vec![(Piece::ObsNow, o), (Piece::ActNow, a)];
                if n > 0 {
                    p.push((Piece::Shared, d));
                }
                p
            }
            Variant::V2 | Variant::V3 => {
                let mut p = vec![(Piece::ObsNow, o)];
                if n > 0 {
                    obs_encoder = Some(enc(o)?);
                    p.push((Piece::ObsEnc, d));
                }
                p.push((Piece::ActFlat, dims.rows() * a));
                p
            }
        };
        let layout = InputLayout {
            pieces,
            norm: norm_for(config.variant, config.input_norm),
        };
        let mlp = Mlp::new(&mlp_widths(layout.width(), &config.hidden, 1), rng)?;
        Ok(Self {
            obs_encoder,
            act_encoder,
            mlp,
            layout,
            dims,
        })
    }

    /// `Q(s̄, ā)` as `[B, 1]`.
    pub fn forward(&self, s_bar: &Tensor, a_bar: &Tensor, shared: Option<&Tensor>) -> Result<(Tensor, CriticCache)> {
        check_window(s_bar, self.dims.rows(), self.dims.obs_dim, "critic observation window")?;
        check_window(a_bar, self.dims.rows(), self.dims.act_dim, "critic action window")?;
        if s_bar.shape()[0] != a_bar.shape()[0] {
            return Err(Error::dim("critic", "observation and action batches differ in size"));
        }
        let mut parts = Vec::with_capacity(self.layout.pieces.len());
        let (mut oc, mut ac) = (None, None);
        for (piece, _) in &self.layout.pieces {
            parts.push(match piece {
                Piece::ObsNow => window_row(s_bar, 0),
                Piece::ActNow => window_row(a_bar, 0),
                Piece::ObsFlat => flatten_window(s_bar),
                Piece::ActFlat => flatten_window(a_bar),
                Piece::ObsEnc => {
                    let (h, c) = self.obs_encoder.as_ref().expect("obs encoder").forward(&past_rows(s_bar)?)?;
                    oc = Some(c);
                    h
                }
                Piece::ActEnc => {
                    let (h, c) = self.act_encoder.as_ref().expect("act encoder").forward(&past_rows(a_bar)?)?;
                    ac = Some(c);
                    h
                }
                Piece::Shared => shared
                    .ok_or_else(|| Error::Usage("critic needs shared encoder features".into()))?
                    .clone(),
            });
        }
        let (x, input) = self.layout.forward(parts)?;
        let (q, mlp) = self.mlp.forward(&x)?;
        Ok((
            q,
            CriticCache {
                obs_encoder: oc,
                act_encoder: ac,
                input,
                mlp,
            },
        ))
    }

    pub fn q(&self, s_bar: &Tensor, a_bar: &Tensor, shared: Option<&Tensor>) -> Result<Tensor> {
        self.forward(s_bar, a_bar, shared).map(|(q, _)| q)
    }

    fn input_grads(&self, cache: &CriticCache, dq: &Tensor) -> Result<(Mlp, Vec<Tensor>)> {
        let (g_mlp, dx) = self.mlp.backward(&cache.mlp, dq)?;
        Ok((g_mlp, self.layout.backward(&cache.input, &dx)?))
    }

    /// Parameter gradients and, for shared features, their input gradient.
    pub fn backward(&self, cache: &CriticCache, dq: &Tensor) -> Result<(Critic, Option<Tensor>)> {
        let (g_mlp, grads) = self.input_grads(cache, dq)?;
        let (mut g_obs, mut g_act, mut d_shared) = (None, None, None);
        for ((piece, _), g) in self.layout.pieces.iter().zip(grads) {
            match piece {
                Piece::ObsEnc => {
                    let c = cache.obs_encoder.as_ref().ok_or_else(|| Error::State("critic obs encoder cache missing".into()))?;
                    g_obs = Some(self.obs_encoder.as_ref().expect("obs encoder").backward(c, &g)?.0);
                }
                Piece::ActEnc => {
                    let c = cache.act_encoder.as_ref().ok_or_else(|| Error::State("critic act encoder cache missing".into()))?;
                    g_act = Some(self.act_encoder.as_ref().expect("act encoder").backward(c, &g)?.0);
                }
                Piece::Shared => d_shared = Some(g),
                _ => {}
            }
        }
        Ok((
            Critic {
                obs_encoder: g_obs,
                act_encoder: g_act,
                mlp: g_mlp,
                layout: self.layout.clone(),
                dims: self.dims,
            },
            d_shared,
        ))
    }

    /// `∂Q/∂ā` through the inputs that read actions directly (the current
    /// row, or the whole flattened window). Encoded history is treated as
    /// data, so its rows receive no gradient.
    pub fn action_grad(&self, cache: &CriticCache, dq: &Tensor) -> Result<Tensor> {
        let (_, grads) = self.input_grads(cache, dq)?;
        let b = dq.rows();
        let (rows, a) = (self.dims.rows(), self.dims.act_dim);
        let mut out = Tensor::zeros(&[b, rows, a]);
        for ((piece, _), g) in self.layout.pieces.iter().zip(grads) {
            match piece {
                Piece::ActNow => {
                    for s in 0..b {
                        let dst = s * rows * a;
                        for (o, v) in out.data_mut()[dst..dst + a].iter_mut().zip(g.row(s)) {
                            *o += v;
                        }
                    }
                }
                Piece::ActFlat => {
                    for (o, v) in out.data_mut().iter_mut().zip(g.data()) {
                        *o += v;
                    }
                }
                _ => {}
            }
        }
        Ok(out)
    }
}

impl Parameterized for Critic {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        if let Some(e) = &self.obs_encoder {
            e.visit(&join(prefix, "obs_encoder"), f);
        }
        if let Some(e) = &self.act_encoder {
            e.visit(&join(prefix, "act_encoder"), f);
        }
        self.mlp.visit(&join(prefix, "mlp"), f);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Tensor)) {
        if let Some(e) = &mut self.obs_encoder {
            e.visit_mut(&join(prefix, "obs_encoder"), f);
        }
        if let Some(e) = &mut self.act_encoder {
            e.visit_mut(&join(prefix, "act_encoder"), f);
        }
        self.mlp.visit_mut(&join(prefix, "mlp"), f);
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::agent::config::VARIANTS;
    use crate::agent::testutil::{random_window, tiny_config};
    use crate::nn::gradcheck::{numerical_input_gradient, relative_error, FD_STEP};

    fn dims(variant: Variant) -> Dims {
        Dims {
            obs_dim: 2,
            act_dim: 1,
            history_len: variant.default_history_len(),
            action_bound: 2.0,
        }
    }

    fn build(variant: Variant, seed: u64) -> (Actor, Critic) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = tiny_config(variant);
        let d = dims(variant);
        (Actor::new(&c, d, &mut rng).unwrap(), Critic::new(&c, d, &mut rng).unwrap())
    }

    /// Shared features for v1, computed the way the agent does.
    fn shared_for(variant: Variant, b: usize) -> Option<Tensor> {
        (variant == Variant::V1).then(|| random_window(b, 1, 8, 1.0, 77).reshape([b, 8]).unwrap())
    }

    #[test]
    fn zero_head_gives_zero_action_and_value() {
        for v in VARIANTS {
            let (mut actor, mut critic) = build(v, 1);
            actor.mlp.zero_head();
            critic.mlp.zero_head();
            let d = dims(v);
            let s = random_window(3, d.rows(), d.obs_dim, 5.0, 2);
            let a = random_window(3, d.rows(), d.act_dim, 2.0, 3);
            let h = shared_for(v, 3);
            let act = actor.act(&s, h.as_ref()).unwrap();
            assert_eq!(act.shape(), &[3, v.actor_outputs(d.history_len) * d.act_dim]);
            assert!(act.data().iter().all(|&x| x == 0.0), "{v}");
            let q = critic.q(&s, &a, h.as_ref()).unwrap();
            assert!(q.data().iter().all(|&x| x == 0.0), "{v}");
        }
    }

    #[test]
    fn actions_stay_within_bound() {
        for v in VARIANTS {
            let (actor, _) = build(v, 4);
            let d = dims(v);
            let s = random_window(1000, d.rows(), d.obs_dim, 100.0, 5);
            let act = actor.act(&s, shared_for(v, 1000).as_ref()).unwrap();
            assert!(act.data().iter().all(|x| x.abs() <= d.action_bound), "{v}");
        }
    }

    #[test]
    fn cae_critic_matches_stepwise_composition() {
        let (_, critic) = build(Variant::Cae, 6);
        let d = dims(Variant::Cae);
        let s = random_window(4, d.rows(), d.obs_dim, 1.0, 7);
        let a = random_window(4, d.rows(), d.act_dim, 1.0, 8);
        let q = critic.q(&s, &a, None).unwrap();
        for b in 0..4 {
            let row = |w: &Tensor, f: usize, r: usize| w.data()[(b * d.rows() + r) * f..(b * d.rows() + r + 1) * f].to_vec();
            let past = |w: &Tensor, f: usize| {
                Tensor::new([d.history_len, f], (1..d.rows()).flat_map(|r| row(w, f, r)).collect()).unwrap()
            };
            let ho = critic.obs_encoder.as_ref().unwrap().encode(&past(&s, 2)).unwrap();
            let ha = critic.act_encoder.as_ref().unwrap().encode(&past(&a, 1)).unwrap();
            let rms = |v: Vec<f64>| {
                let ms = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
                let r = 1.0 / (ms + crate::encoder::NORM_EPS).sqrt();
                v.into_iter().map(move |x| x * r)
            };
            let mut x: Vec<f64> = rms(row(&s, 2, 0)).chain(rms(row(&a, 1, 0))).collect();
            x.extend_from_slice(ho.data());
            x.extend_from_slice(ha.data());
            let x = Tensor::new([1, x.len()], x).unwrap();
            let expect = critic.mlp.forward(&x).unwrap().0;
            assert!((q.data()[b] - expect.data()[0]).abs() <= 1e-15);
        }
    }

    #[test]
    fn past_actions_reach_q_only_through_the_action_encoder() {
        let d = dims(Variant::Cae);
        let s = random_window(2, d.rows(), d.obs_dim, 1.0, 9);
        let a = random_window(2, d.rows(), d.act_dim, 1.0, 10);
        // reverse the past rows of each window
        let mut permuted = a.clone();
        for b in 0..2 {
            let base = b * d.rows();
            for r in 1..d.rows() {
                permuted.data_mut()[base + r] = a.data()[base + d.rows() - r];
            }
        }
        let (_, cae) = build(Variant::Cae, 11);
        assert_ne!(cae.q(&s, &a, None).unwrap(), cae.q(&s, &permuted, None).unwrap());
        let (_, fo) = build(Variant::CaeFo, 11);
        assert_eq!(fo.q(&s, &a, None).unwrap(), fo.q(&s, &permuted, None).unwrap());

        // with the action encoder's output pinned, the permutation is invisible
        let mut pinned = cae.clone();
        let enc = pinned.act_encoder.as_mut().unwrap();
        enc.attention.w_o.fill(0.0);
        assert_eq!(pinned.q(&s, &a, None).unwrap(), pinned.q(&s, &permuted, None).unwrap());
    }

    #[test]
    fn observation_only_critic_has_no_action_encoder() {
        let (_, critic) = build(Variant::CaeFo, 12);
        assert!(critic.act_encoder.is_none());
        assert!(critic.named_params().iter().all(|(n, _)| !n.starts_with("act_encoder")));
        let (_, cae) = build(Variant::Cae, 12);
        assert!(cae.named_params().iter().any(|(n, _)| n.starts_with("act_encoder")));
    }

    #[test]
    fn memoryless_and_flat_networks_have_no_encoders() {
        for v in [Variant::Td3, Variant::Fwtd3] {
            let (actor, critic) = build(v, 13);
            assert!(actor.encoder.is_none() && critic.obs_encoder.is_none() && critic.act_encoder.is_none());
            assert_eq!(actor.layout.norm, InputNorm::None);
        }
    }

    #[test]
    fn sequence_actor_emits_whole_window() {
        let (actor, critic) = build(Variant::V2, 14);
        let d = dims(Variant::V2);
        assert_eq!(actor.outputs(), d.rows());
        assert!(critic.layout.has(Piece::ActFlat));
        let (v3, _) = build(Variant::V3, 14);
        assert_eq!(v3.outputs(), 1);
    }

    #[test]
    fn action_gradient_matches_finite_differences() {
        for v in VARIANTS {
            let (_, critic) = build(v, 15);
            let d = dims(v);
            let s = random_window(2, d.rows(), d.obs_dim, 1.0, 16);
            let a = random_window(2, d.rows(), d.act_dim, 1.0, 17);
            let h = shared_for(v, 2);
            let (q, cache) = critic.forward(&s, &a, h.as_ref()).unwrap();
            let dq = Tensor::full(&[2, 1], 1.0);
            let analytic = critic.action_grad(&cache, &dq).unwrap();
            let mut numeric = numerical_input_gradient(&a, FD_STEP, |a| critic.q(&s, a, h.as_ref()).unwrap().sum());
            // encoded action history is treated as data
            if critic.layout.has(Piece::ActEnc) {
                for b in 0..2 {
                    for r in 1..d.rows() {
                        numeric.data_mut()[b * d.rows() + r] = 0.0;
                    }
                }
            }
            assert!(q.is_finite());
            let err = relative_error(analytic.data(), numeric.data());
            assert!(err < 1e-6, "{v}: {err}");
        }
    }
}
