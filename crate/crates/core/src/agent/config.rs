use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Separate encoders for the actor's observation history and the critic's
    /// observation and action histories.
    Cae,
    /// Observation history only, in both actor and critic.
    CaeFo,
    /// Flat concatenation of the window into plain MLPs.
    Fwtd3,
    /// Memoryless: the current observation only.
    Td3,
    /// One encoder over joint observation/action history, shared by actor
    /// and critics.
    V1,
    /// Actor emits the whole action window; the critic reads it flat.
    V2,
    /// As `V2`, but the actor emits the current action only.
    V3,
}

pub const VARIANTS: [Variant; 7] = [
    Variant::Cae,
    Variant::CaeFo,
    Variant::Fwtd3,
    Variant::Td3,
    Variant::V1,
    Variant::V2,
    Variant::V3,
];

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Cae => "cae",
            Variant::CaeFo => "cae-fo",
            Variant::Fwtd3 => "fwtd3",
            Variant::Td3 => "td3",
            Variant::V1 => "v1",
            Variant::V2 => "v2",
            Variant::V3 => "v3",
        }
    }

    /// History length used when none is configured.
    pub fn default_history_len(self) -> usize {
        match self {
            Variant::Td3 => 0,
            // window of three observations
            Variant::Fwtd3 => 2,
            _ => 3,
        }
    }

    /// Actions produced per actor call.
    pub fn actor_outputs(self, history_len: usize) -> usize {
        match self {
            Variant::V2 => history_len + 1,
            _ => 1,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VARIANTS
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = VARIANTS.iter().map(|v| v.name()).collect();
                Error::Config(format!("unknown variant `{s}` (expected one of {names:?})"))
            })
    }
}

/// Where root-mean-square normalization is applied to network inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputNorm {
    /// The current observation and the current action, each on its own.
    Current,
    /// The whole concatenated MLP input.
    Joint,
    /// Each encoder output on its own; current values pass through raw.
    Encoded,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub variant: Variant,
    /// `N`; the window holds `N + 1` steps. Variant default when absent.
    pub history_len: Option<usize>,
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: usize,
    pub target_noise_sigma: f64,
    pub target_noise_clip: f64,
    pub exploration_sigma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub hidden: Vec<usize>,
    pub input_norm: InputNorm,
    pub encoder: EncoderConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Cae,
            history_len: None,
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            target_noise_sigma: 0.2,
            target_noise_clip: 0.5,
            exploration_sigma: 0.1,
            batch_size: 64,
            replay_capacity: 100_000,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            hidden: vec![64, 64],
            input_norm: InputNorm::Current,
            encoder: EncoderConfig::default(),
        }
    }
}

impl AgentConfig {
    pub fn history_len(&self) -> usize {
        self.history_len.unwrap_or_else(|| self.variant.default_history_len())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if self.policy_delay == 0 || self.batch_size == 0 || self.replay_capacity == 0 {
            return bad("policy_delay, batch_size and replay_capacity must be positive".into());
        }
        if self.target_noise_clip < 0.0 || self.target_noise_sigma < 0.0 || self.exploration_sigma < 0.0 {
            return bad("noise scales and the noise clip must be non-negative".into());
        }
        if self.actor_lr <= 0.0 || self.critic_lr <= 0.0 {
            return bad("learning rates must be positive".into());
        }
        if self.hidden.contains(&0) {
            return bad(format!("hidden widths must be positive, got {:?}", self.hidden));
        }
        if self.variant == Variant::Td3 && self.history_len() != 0 {
            return bad(format!("td3 is memoryless; history_len must be 0, got {}", self.history_len()));
        }
        let e = &self.encoder;
        if e.d_model == 0 || e.heads == 0 || e.d_model % e.heads != 0 {
            return bad(format!("encoder d_model {} must be a positive multiple of heads {}", e.d_model, e.heads));
        }
        if e.channels == 0 || e.time_kernel % 2 == 0 || e.obs_kernel % 2 == 0 {
            return bad("encoder channels must be positive and kernel lengths odd".into());
        }
        Ok(())
    }
}
