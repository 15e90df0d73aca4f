//! Fixed-length observation windows, newest first.

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WindowState {
    /// `[o_t, o_{t−1}, …, o_{t−N}]`
    pub obs_ids: Vec<usize>,
}

impl WindowState {
    pub fn new(obs_ids: Vec<usize>) -> Self {
        assert!(!obs_ids.is_empty(), "a window holds at least one observation");
        Self { obs_ids }
    }

    /// `N` for a window of `N + 1` observations.
    pub fn history_len(&self) -> usize {
        self.obs_ids.len() - 1
    }

    pub fn check(&self, n_obs: usize) -> Result<()> {
        match self.obs_ids.iter().find(|&&o| o >= n_obs) {
            Some(o) => Err(Error::Usage(format!("observation id {o} out of range for {n_obs} observations"))),
            None => Ok(()),
        }
    }

    /// Every window of `n + 1` observations, in lexicographic order.
    pub fn all(n_obs: usize, n: usize) -> Vec<WindowState> {
        let len = n + 1;
        let total = n_obs.pow(len as u32);
        (0..total)
            .map(|mut code| {
                let mut ids = vec![0; len];
                for slot in ids.iter_mut().rev() {
                    *slot = code % n_obs;
                    code /= n_obs;
                }
                WindowState::new(ids)
            })
            .collect()
    }

    pub fn slide(&self, new_obs: usize) -> WindowState {
        WindowState::new(sliding_window_update(&self.obs_ids, new_obs))
    }
}

/// Queue form: `[new, window[0], …, window[N−1]]`.
pub fn sliding_window_update<T: Clone>(window: &[T], new_obs: T) -> Vec<T> {
    let mut next = Vec::with_capacity(window.len());
    next.push(new_obs);
    next.extend_from_slice(&window[..window.len() - 1]);
    next
}

/// Matrix form on a `[D × (N+1)]` window whose columns are observations:
/// `o · [1 0_{1×N}] + s̄ · [[0_{N×1}, I_N], [0, 0_{1×N}]]`.
pub fn sliding_window_matrix(window: &Array2<f64>, new_obs: &[f64]) -> Result<Array2<f64>> {
    let (d, cols) = window.dim();
    if new_obs.len() != d {
        return Err(Error::dim(
            "sliding window",
            format!("observation has {} entries, window rows {d}", new_obs.len()),
        ));
    }
    let o = Array2::from_shape_vec((d, 1), new_obs.to_vec()).expect("column shape");
    let mut head = Array2::zeros((1, cols));
    head[[0, 0]] = 1.0;
    let mut shift = Array2::zeros((cols, cols));
    for i in 0..cols - 1 {
        shift[[i, i + 1]] = 1.0;
    }
    Ok(o.dot(&head) + window.dot(&shift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn queue_cases() {
        assert_eq!(sliding_window_update(&[3, 2, 1], 4), vec![4, 3, 2]);
        assert_eq!(sliding_window_update(&[7], 9), vec![9]);
    }

    #[test]
    fn matrix_form_matches_queue_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.random_range(0..5);
            let w: Vec<f64> = (0..=n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let o: f64 = rng.random_range(-10.0..10.0);
            let q = sliding_window_update(&w, o);
            let m = sliding_window_matrix(&Array2::from_shape_vec((1, n + 1), w).unwrap(), &[o]).unwrap();
            let bits: Vec<u64> = m.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits, q.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn enumerates_every_window() {
        let all = WindowState::all(3, 1);
        assert_eq!(all.len(), 9);
        assert_eq!(all[5].obs_ids, vec![1, 2]);
    }
}
