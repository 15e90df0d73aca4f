use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One evaluation point. Empty cells mean nothing happened since the last
/// row (no finished training episode, no update yet).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: usize,
    /// Training episodes started so far.
    pub episode: usize,
    /// Mean evaluation return.
    pub episodic_return: f64,
    pub eval_std: f64,
    /// Mean return of training episodes finished since the last row.
    pub train_return: Option<f64>,
    pub actor_loss: Option<f64>,
    pub critic_loss: Option<f64>,
    pub mean_q: Option<f64>,
    pub wall_ms: u64,
    pub seed: u64,
}

impl MetricsRow {
    pub fn check_finite(&self) -> Result<()> {
        let cells = [
            ("episodic_return", Some(self.episodic_return)),
            ("eval_std", Some(self.eval_std)),
            ("train_return", self.train_return),
            ("actor_loss", self.actor_loss),
            ("critic_loss", self.critic_loss),
            ("mean_q", self.mean_q),
        ];
        for (name, v) in cells {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("{name} = {v} at step {}", self.step)));
                }
            }
        }
        Ok(())
    }
}

/// Streams rows to a headered CSV file.
pub struct MetricsWriter {
    inner: csv::Writer<File>,
    last_step: Option<usize>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self {
            inner: csv::Writer::from_path(path)?,
            last_step: None,
        })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        row.check_finite()?;
        if self.last_step.is_some_and(|s| row.step <= s) {
            return Err(Error::Usage(format!("metrics step {} does not increase", row.step)));
        }
        self.last_step = Some(row.step);
        self.inner.serialize(row)?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Trailing moving average; the first `window − 1` points average what is
/// available.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    assert!(window > 0, "moving-average window must be positive");
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    for i in 0..xs.len() {
        sum += xs[i];
        if i >= window {
            sum -= xs[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Evaluation returns in the last 20% of training (`step ≥ 0.8·total`).
pub fn final_window(rows: &[MetricsRow], total_steps: usize) -> Vec<f64> {
    let cut = 0.8 * total_steps as f64;
    rows.iter()
        .filter(|r| r.step as f64 >= cut)
        .map(|r| r.episodic_return)
        .collect()
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
