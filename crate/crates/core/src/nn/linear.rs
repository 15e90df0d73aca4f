use rand::Rng;

use super::params::{join, Parameterized};
use super::{uniform_init, Layer};
use crate::error::{Error, Result};
use crate::tensor::{gemm, Tensor};

/// Affine layer `y = W·x + b` applied to the trailing axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    /// `[out × in]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

pub type LinearParams = Linear;

#[derive(Clone, Debug)]
pub struct LinearCache {
    input: Tensor,
}

impl Linear {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: uniform_init(&[out_dim, in_dim], in_dim, rng),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.ndim() != 2 || bias.shape() != [weight.shape()[0]] {
            return Err(Error::dim(
                "linear",
                format!("weight {:?} and bias {:?} disagree", weight.shape(), bias.shape()),
            ));
        }
        Ok(Self { weight, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    fn name(&self) -> String {
        format!("linear {}->{}", self.in_dim(), self.out_dim())
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (in_dim, out_dim) = (self.in_dim(), self.out_dim());
        if x.last_dim() != in_dim {
            return Err(Error::dim(
                self.name(),
                format!("input width {} (shape {:?})", x.last_dim(), x.shape()),
            ));
        }
        let rows = x.rows();
        let mut y = Vec::with_capacity(rows * out_dim);
        for _ in 0..rows {
            y.extend_from_slice(self.bias.data());
        }
        gemm(
            x.data(),
            (rows, in_dim),
            false,
            self.weight.data(),
            (out_dim, in_dim),
            true,
            &mut y,
            1.0,
        );
        let mut shape = x.shape().to_vec();
        *shape.last_mut().unwrap() = out_dim;
        Tensor::new(shape, y)
    }
}

impl Layer for Linear {
    type Cache = LinearCache;
    type Grad = Linear;

    fn forward(&self, x: &Tensor) -> Result<(Tensor, LinearCache)> {
        let y = Linear::forward(self, x)?;
        Ok((y, LinearCache { input: x.clone() }))
    }

    fn backward(&self, cache: &LinearCache, dy: &Tensor) -> Result<(Linear, Tensor)> {
        let (in_dim, out_dim) = (self.in_dim(), self.out_dim());
        let x = &cache.input;
        let rows = x.rows();
        if dy.last_dim() != out_dim || dy.rows() != rows {
            return Err(Error::State(format!(
                "{}: cached input {:?} does not match output gradient {:?}",
                self.name(),
                x.shape(),
                dy.shape()
            )));
        }
        let mut dw = vec![0.0; out_dim * in_dim];
        gemm(dy.data(), (rows, out_dim), true, x.data(), (rows, in_dim), false, &mut dw, 0.0);
        let mut db = vec![0.0; out_dim];
        for r in 0..rows {
            for (acc, g) in db.iter_mut().zip(dy.row(r)) {
                *acc += g;
            }
        }
        let mut dx = vec![0.0; rows * in_dim];
        gemm(dy.data(), (rows, out_dim), false, self.weight.data(), (out_dim, in_dim), false, &mut dx, 0.0);
        let grad = Linear {
            weight: Tensor::new(vec![out_dim, in_dim], dw)?,
            bias: Tensor::new(vec![out_dim], db)?,
        };
        Ok((grad, Tensor::new(x.shape().to_vec(), dx)?))
    }
}

impl Parameterized for Linear {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "weight"), &self.weight);
        f(join(prefix, "bias"), &self.bias);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Tensor)) {
        f(join(prefix, "weight"), &mut self.weight);
        f(join(prefix, "bias"), &mut self.bias);
    }
}
