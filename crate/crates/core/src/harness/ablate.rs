use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use super::config::RunConfig;
use super::metrics::{moving_average, MetricsRow};
use super::train::train;
use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const SMOOTHED_FILE: &str = "smoothed.csv";
pub const SMOOTHING_WINDOW: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LengthSummary {
    pub history_len: usize,
    pub final_window_mean: f64,
    pub final_window_std: f64,
    pub evaluations: usize,
    pub metrics: PathBuf,
}

#[derive(Clone, Debug)]
pub struct AblationSummary {
    pub lengths: Vec<LengthSummary>,
    /// Evaluation steps, shared by every length.
    pub steps: Vec<usize>,
    /// Window-5 moving average of the evaluation return, one curve per length.
    pub smoothed: Vec<Vec<f64>>,
}

/// One seeded run per history length under `base.out_dir/len_N/`, then
/// `summary.csv` and `smoothed.csv` next to them.
pub fn ablate(base: &RunConfig, lens: &[usize]) -> Result<AblationSummary> {
    if lens.is_empty() {
        return Err(Error::Config("ablation needs at least one history length".into()));
    }
    for &n in lens {
        let mut c = base.clone();
        c.agent.history_len = Some(n);
        c.validate()?;
    }
    fs::create_dir_all(&base.out_dir)?;
    let mut lengths = Vec::new();
    let mut curves: Vec<Vec<MetricsRow>> = Vec::new();
    for &n in lens {
        let mut c = base.clone();
        c.agent.history_len = Some(n);
        c.out_dir = base.out_dir.join(format!("len_{n}"));
        let out = train(&c)?;
        lengths.push(LengthSummary {
            history_len: n,
            final_window_mean: out.final_window_mean,
            final_window_std: out.final_window_std,
            evaluations: out.rows.len(),
            metrics: c.out_dir.join(super::train::METRICS_FILE),
        });
        curves.push(out.rows);
    }

    let mut w = csv::Writer::from_path(base.out_dir.join(SUMMARY_FILE))?;
    for l in &lengths {
        w.serialize(l)?;
    }
    w.flush()?;

    let steps: Vec<usize> = curves[0].iter().map(|r| r.step).collect();
    let smoothed: Vec<Vec<f64>> = curves
        .iter()
        .map(|rows| moving_average(&rows.iter().map(|r| r.episodic_return).collect::<Vec<_>>(), SMOOTHING_WINDOW))
        .collect();
    let mut w = csv::Writer::from_path(base.out_dir.join(SMOOTHED_FILE))?;
    let mut header = vec!["step".to_string()];
    header.extend(lens.iter().map(|n| format!("len_{n}")));
    w.write_record(&header)?;
    for (i, step) in steps.iter().enumerate() {
        let mut rec = vec![step.to_string()];
        rec.extend(smoothed.iter().map(|c| c[i].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(AblationSummary { lengths, steps, smoothed })
}
