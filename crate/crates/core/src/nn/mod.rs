//! Fixed-architecture network primitives with hand-written backward passes.

pub mod activation;
pub mod adam;
pub mod attention;
pub mod checkpoint;
pub mod conv;
pub mod gradcheck;
pub mod linear;
pub mod mlp;
pub mod params;
pub mod pool;

use rand::Rng;

pub use activation::{Relu, Tanh};
pub use adam::AdamState;
pub use attention::{AttentionParams, MultiHeadAttention};
pub use conv::{DepthwiseSeparable, DepthwiseSeparableParams};
pub use linear::{Linear, LinearParams};
pub use mlp::Mlp;
pub use params::{param_count, soft_update, NetworkParams, Parameterized};
pub use pool::{average_pool, AveragePool};

use crate::error::Result;
use crate::tensor::Tensor;

/// A differentiable layer. `forward` returns what `backward` needs; gradients
/// for parameterized layers come back in a value of the layer's own type.
pub trait Layer {
    type Cache;
    type Grad;

    fn forward(&self, x: &Tensor) -> Result<(Tensor, Self::Cache)>;

    /// Returns `(parameter gradients, input gradient)`.
    fn backward(&self, cache: &Self::Cache, dy: &Tensor) -> Result<(Self::Grad, Tensor)>;
}

/// Reverse pass of any [`Layer`] against a cache from its own forward pass.
pub fn backward<L: Layer>(layer: &L, cache: &L::Cache, dy: &Tensor) -> Result<(L::Grad, Tensor)> {
    layer.backward(cache, dy)
}

/// `uniform(−1/√fan_in, 1/√fan_in)` initialization.
pub(crate) fn uniform_init(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("init shape")
}
