//! Training loop, evaluation, tabular verification, ablation and
//! parameter accounting behind the `cae-rl` command.

pub mod ablate;
pub mod config;
pub mod eval;
pub mod metrics;
pub mod params;
pub mod train;
pub mod verify;

pub use ablate::{ablate, AblationSummary, LengthSummary};
pub use config::{Overrides, RunConfig};
pub use eval::{evaluate, random_policy_returns, rollout, EvalStats, Start};
pub use metrics::{final_window, moving_average, read_metrics, MetricsRow};
pub use params::{param_table, ParamTable};
pub use train::{train, TrainOutcome};
pub use verify::{verify_pomdp, VerifyReport};
