//! Actor–critic agents over observation/action windows.

pub mod config;
pub mod networks;
pub mod replay;
pub mod td3;

pub use config::{AgentConfig, InputNorm, Variant, VARIANTS};
pub use networks::{Actor, Critic, Dims};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use td3::{Agent, CriticSet, Networks, UpdateStats};
