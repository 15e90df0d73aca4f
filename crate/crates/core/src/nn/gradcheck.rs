//! Central finite-difference gradients, used to check the hand-written
//! backward passes. Nothing here calls a `backward` method.

use super::params::Parameterized;
use crate::tensor::Tensor;

pub const FD_STEP: f64 = 1e-5;

/// `∂loss/∂p` for every scalar in `params`, by `(f(p+h) − f(p−h)) / 2h`.
pub fn numerical_param_gradient<P>(params: &P, h: f64, loss: impl Fn(&P) -> f64) -> P
where
    P: Parameterized + Clone,
{
    let mut probe = params.clone();
    let mut grad = params.zeros_like();
    let sizes: Vec<usize> = params.named_params().iter().map(|(_, t)| t.len()).collect();
    for (ti, &size) in sizes.iter().enumerate() {
        for i in 0..size {
            let orig = probe.named_params()[ti].1.data()[i];
            set(&mut probe, ti, i, orig + h);
            let up = loss(&probe);
            set(&mut probe, ti, i, orig - h);
            let down = loss(&probe);
            set(&mut probe, ti, i, orig);
            set(&mut grad, ti, i, (up - down) / (2.0 * h));
        }
    }
    grad
}

fn set<P: Parameterized>(p: &mut P, tensor: usize, index: usize, value: f64) {
    let mut all = p.named_params_mut();
    all[tensor].1.data_mut()[index] = value;
}

/// `∂f/∂x` for a tensor input.
pub fn numerical_input_gradient(x: &Tensor, h: f64, f: impl Fn(&Tensor) -> f64) -> Tensor {
    let mut probe = x.clone();
    let mut grad = x.zeros_like();
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = f(&probe);
        probe.data_mut()[i] = orig - h;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (up - down) / (2.0 * h);
    }
    grad
}

/// `‖a − n‖₂ / max(‖a‖₂, ‖n‖₂)`; zero when both vectors vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, b)| a - b));
    let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied()));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Relative error of two gradient collections taken as one flat vector.
/// Tensors whose gradients are tiny next to the rest of the network do not
/// dominate the measure through finite-difference rounding.
pub fn flat_relative_error<P: Parameterized>(analytic: &P, numeric: &P) -> f64 {
    let flat = |p: &P| -> Vec<f64> {
        let mut v = Vec::new();
        p.visit("", &mut |_, t| v.extend_from_slice(t.data()));
        v
    };
    relative_error(&flat(analytic), &flat(numeric))
}

/// Largest per-tensor relative error between two gradient collections.
pub fn max_relative_error<P: Parameterized>(analytic: &P, numeric: &P) -> f64 {
    analytic
        .named_params()
        .iter()
        .zip(numeric.named_params())
        .map(|((_, a), (_, n))| relative_error(a.data(), n.data()))
        .fold(0.0, f64::max)
}
