use super::Layer;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default)]
pub struct Relu;

#[derive(Clone, Copy, Debug, Default)]
pub struct Tanh;

fn check_same(name: &str, cached: &Tensor, dy: &Tensor) -> Result<()> {
    if cached.shape() != dy.shape() {
        return Err(Error::State(format!(
            "{name}: cached {:?} vs output gradient {:?}",
            cached.shape(),
            dy.shape()
        )));
    }
    Ok(())
}

impl Layer for Relu {
    type Cache = Tensor;
    type Grad = ();

    fn forward(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        Ok((x.map(|v| v.max(0.0)), x.clone()))
    }

    fn backward(&self, input: &Tensor, dy: &Tensor) -> Result<((), Tensor)> {
        check_same("relu", input, dy)?;
        let data = input
            .data()
            .iter()
            .zip(dy.data())
            .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
            .collect();
        Ok(((), Tensor::new(dy.shape().to_vec(), data)?))
    }
}

impl Layer for Tanh {
    /// Cached output; `d tanh = 1 − y²`.
    type Cache = Tensor;
    type Grad = ();

    fn forward(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let y = x.map(f64::tanh);
        Ok((y.clone(), y))
    }

    fn backward(&self, output: &Tensor, dy: &Tensor) -> Result<((), Tensor)> {
        check_same("tanh", output, dy)?;
        let data = output
            .data()
            .iter()
            .zip(dy.data())
            .map(|(&y, &g)| g * (1.0 - y * y))
            .collect();
        Ok(((), Tensor::new(dy.shape().to_vec(), data)?))
    }
}
