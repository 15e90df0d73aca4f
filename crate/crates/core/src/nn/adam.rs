use super::params::{check_structure, Parameterized};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Adam optimizer state for one parameter collection.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step_count: u64,
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub learning_rate: f64,
}

impl AdamState {
    pub fn new(params: &(impl Parameterized + ?Sized), learning_rate: f64) -> Self {
        let zeros: Vec<Tensor> = params
            .named_params()
            .into_iter()
            .map(|(_, t)| t.zeros_like())
            .collect();
        Self {
            step_count: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            learning_rate,
        }
    }

    /// One bias-corrected Adam update of `params` along `grads`.
    pub fn step(
        &mut self,
        params: &mut (impl Parameterized + ?Sized),
        grads: &(impl Parameterized + ?Sized),
    ) -> Result<()> {
        let g = grads.named_params();
        let mut p = params.named_params_mut();
        check_structure(
            p.iter().map(|(n, t)| (n.as_str(), t.shape())),
            g.iter().map(|(n, t)| (n.as_str(), t.shape())),
        )?;
        if p.len() != self.first_moment.len()
            || p.iter().zip(&self.first_moment).any(|((_, t), m)| t.shape() != m.shape())
        {
            return Err(Error::Structure("optimizer moments do not match parameters".into()));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for (((_, param), (_, grad)), (m, v)) in p
            .iter_mut()
            .zip(&g)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            for (((w, &gi), mi), vi) in param
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *w -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetworkParams;

    fn one(v: f64) -> NetworkParams {
        let mut p = NetworkParams::new();
        p.insert("x", Tensor::scalar(v)).unwrap();
        p
    }

    #[test]
    fn zero_gradient_is_noop() {
        let mut p = one(0.7);
        let mut opt = AdamState::new(&p, 1e-3);
        for _ in 0..25 {
            opt.step(&mut p, &one(0.0)).unwrap();
        }
        assert_eq!(p, one(0.7));
        assert_eq!(opt.step_count, 25);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = one(0.0);
        let mut opt = AdamState::new(&p, 1e-3);
        opt.step(&mut p, &one(1.0)).unwrap();
        let moved = -p.get("x").unwrap().data()[0];
        assert!((moved - 1e-3 / (1.0 + 1e-8)).abs() < 1e-18);
    }

    #[test]
    fn matches_scalar_reference() {
        // Independent scalar re-implementation of two Adam steps.
        let (lr, b1, b2, eps) = (1e-3f64, 0.9f64, 0.999f64, 1e-8f64);
        let g = 0.37;
        let (mut x, mut m, mut v) = (0.25f64, 0.0f64, 0.0f64);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            x -= lr * mh / (vh.sqrt() + eps);
        }
        let mut p = one(0.25);
        let mut opt = AdamState::new(&p, lr);
        opt.step(&mut p, &one(g)).unwrap();
        opt.step(&mut p, &one(g)).unwrap();
        assert!((p.get("x").unwrap().data()[0] - x).abs() <= 1e-15);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = one(0.0);
        let mut opt = AdamState::new(&p, 1e-3);
        let mut g = NetworkParams::new();
        g.insert("x", Tensor::zeros(&[2])).unwrap();
        assert!(opt.step(&mut p, &g).is_err());
        assert_eq!(opt.step_count, 0);
    }
}
