use super::Layer;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean over the time axis: `[L × D] → [D]`, `[B × L × D] → [B × D]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct AveragePool;

#[derive(Clone, Debug)]
pub struct PoolCache {
    input_shape: Vec<usize>,
}

fn split(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match *shape {
        [l, d] => Ok((1, l, d)),
        [b, l, d] => Ok((b, l, d)),
        _ => Err(Error::dim("average_pool", format!("expected [L, D] or [B, L, D], got {shape:?}"))),
    }
}

/// Functional form of [`AveragePool`].
pub fn average_pool(x: &Tensor) -> Result<Tensor> {
    AveragePool.forward(x).map(|(y, _)| y)
}

impl Layer for AveragePool {
    type Cache = PoolCache;
    type Grad = ();

    fn forward(&self, x: &Tensor) -> Result<(Tensor, PoolCache)> {
        let (b, l, d) = split(x.shape())?;
        if l == 0 {
            return Err(Error::dim("average_pool", "empty time axis"));
        }
        let inv = 1.0 / l as f64;
        let mut out = vec![0.0; b * d];
        for i in 0..b {
            let acc = &mut out[i * d..(i + 1) * d];
            for t in 0..l {
                for (a, v) in acc.iter_mut().zip(x.row(i * l + t)) {
                    *a += v;
                }
            }
            acc.iter_mut().for_each(|a| *a *= inv);
        }
        let shape = if x.ndim() == 2 { vec![d] } else { vec![b, d] };
        Ok((
            Tensor::new(shape, out)?,
            PoolCache {
                input_shape: x.shape().to_vec(),
            },
        ))
    }

    fn backward(&self, cache: &PoolCache, dy: &Tensor) -> Result<((), Tensor)> {
        let (b, l, d) = split(&cache.input_shape)?;
        if dy.len() != b * d {
            return Err(Error::State(format!(
                "average_pool: cached input {:?} vs output gradient {:?}",
                cache.input_shape,
                dy.shape()
            )));
        }
        let inv = 1.0 / l as f64;
        let mut dx = Vec::with_capacity(b * l * d);
        for i in 0..b {
            let g = &dy.data()[i * d..(i + 1) * d];
            for _ in 0..l {
                dx.extend(g.iter().map(|v| v * inv));
            }
        }
        Ok(((), Tensor::new(cache.input_shape.clone(), dx)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn means_over_time() {
        let x = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(average_pool(&x).unwrap().data(), &[2.0, 3.0]);
        let single = Tensor::from_rows(&[vec![-1.5, 0.25, 9.0]]).unwrap();
        assert_eq!(average_pool(&single).unwrap().data(), single.data());
    }

    #[test]
    fn sum_loss_gradient_is_uniform() {
        let x = Tensor::new(vec![4, 3], (0..12).map(f64::from).collect()).unwrap();
        let (y, cache) = AveragePool.forward(&x).unwrap();
        let (_, dx) = AveragePool.backward(&cache, &Tensor::full(y.shape(), 1.0)).unwrap();
        assert!(dx.data().iter().all(|&g| g == 0.25));
    }

    #[test]
    fn rejects_bad_rank() {
        assert!(average_pool(&Tensor::vector(vec![1.0])).is_err());
    }
}
