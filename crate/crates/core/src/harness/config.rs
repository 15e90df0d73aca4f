use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, Variant};
use crate::envs::Env;
use crate::error::{Error, Result};

/// Written at the top of every echoed config.
pub const SCALE_NOTE: &str = "# Desk-scale run. Default budget is 3e4 environment steps; \
full-scale continuous-control experiments use 1e6 (1e5 for pendulum).";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub env: String,
    /// Observed state indices; the environment default when absent.
    pub mask: Option<Vec<usize>>,
    pub total_steps: usize,
    /// Steps of uniform-random actions before the policy acts and learning starts.
    pub warmup_steps: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Record elapsed milliseconds in the metrics. Off by default so
    /// repeated runs produce identical files.
    pub log_wall_time: bool,
    pub agent: AgentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: "po-integrator".into(),
            mask: None,
            total_steps: 30_000,
            warmup_steps: 1_000,
            eval_every: 1_000,
            eval_episodes: 5,
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            log_wall_time: false,
            agent: AgentConfig::default(),
        }
    }
}

/// Command-line values that replace config-file entries.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub env: Option<String>,
    pub variant: Option<Variant>,
    pub history_len: Option<usize>,
    pub total_steps: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("run config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(e) = &o.env {
            self.env = e.clone();
        }
        if let Some(v) = o.variant {
            if v != self.agent.variant {
                // a variant switch drops a length chosen for the old one
                self.agent.history_len = None;
            }
            self.agent.variant = v;
        }
        if let Some(n) = o.history_len {
            self.agent.history_len = Some(n);
        }
        if let Some(s) = o.total_steps {
            self.total_steps = s;
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
    }

    pub fn make_env(&self) -> Result<Env> {
        Env::make(&self.env, self.mask.clone())
    }

    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        self.make_env()?;
        let rows = self.agent.history_len() + 1;
        if self.warmup_steps < rows || self.total_steps <= self.warmup_steps {
            return Err(Error::Config(format!(
                "need total_steps > warmup_steps >= N+1 = {rows}; got total_steps {} and warmup_steps {}",
                self.total_steps, self.warmup_steps
            )));
        }
        if self.eval_every == 0 || self.eval_episodes == 0 {
            return Err(Error::Config("eval_every and eval_episodes must be positive".into()));
        }
        Ok(())
    }

    /// Effective configuration with the scale note, as written next to the metrics.
    pub fn echo(&self) -> Result<String> {
        let body = toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(format!("{SCALE_NOTE}\n\n{body}"))
    }
}
