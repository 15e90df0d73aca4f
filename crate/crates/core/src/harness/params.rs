use std::fmt;

use crate::agent::{Agent, AgentConfig};
use crate::error::Result;
use crate::nn::Parameterized;

/// Online-network parameter counts grouped by component.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTable {
    pub rows: Vec<(String, usize)>,
    pub total: usize,
}

impl ParamTable {
    pub fn get(&self, component: &str) -> usize {
        self.rows.iter().find(|(n, _)| n == component).map_or(0, |(_, c)| *c)
    }

    /// Everything inside a history encoder.
    pub fn encoder_total(&self) -> usize {
        self.rows.iter().filter(|(n, _)| n.contains("encoder")).map(|(_, c)| c).sum()
    }
}

impl fmt::Display for ParamTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<24}{:>10}", "component", "params")?;
        for (name, count) in &self.rows {
            writeln!(f, "{name:<24}{count:>10}")?;
        }
        writeln!(f, "{:<24}{:>10}", "encoders", self.encoder_total())?;
        write!(f, "{:<24}{:>10}", "total", self.total)
    }
}

/// Component = the name up to and including the first sub-network
/// (`actor.mlp`, `critic1.act_encoder`, `shared_encoder`).
fn component(name: &str) -> String {
    let parts: Vec<&str> = name.split('.').collect();
    if parts[0] == "shared_encoder" {
        parts[0].to_string()
    } else {
        format!("{}.{}", parts[0], parts[1])
    }
}

pub fn param_table(config: &AgentConfig, obs_dim: usize, act_dim: usize) -> Result<ParamTable> {
    let agent = Agent::new(config.clone(), obs_dim, act_dim, 1.0, 0)?;
    let mut rows: Vec<(String, usize)> = Vec::new();
    for (name, t) in agent.online.named_params() {
        let c = component(&name);
        match rows.iter_mut().find(|(n, _)| *n == c) {
            Some((_, count)) => *count += t.len(),
            None => rows.push((c, t.len())),
        }
    }
    Ok(ParamTable {
        rows,
        total: agent.online.param_count(),
    })
}
