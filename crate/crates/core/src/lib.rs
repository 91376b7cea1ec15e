//! Goal-stack intention environment, execution and intention policies,
//! training procedures and evaluation harness.

pub mod assistant;
pub mod config;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod policy;
pub mod training;
pub mod world;

pub use assistant::{Assistant, AssistantReply, ReplyKind};
pub use env::{CostConfig, EnvConfig, IntentAction, IntentionEnv, IntentionState, MoveSelector, OracleMoves, StepOutcome};
pub use error::{Error, Result};
pub use config::RunConfig;
pub use harness::{EpisodeTrace, MetricsReport, PolicySpec};
pub use policy::{BaselineKind, ExecConfig, ExecPolicy, IntentConfig, IntentionModel};
pub use training::{A2CConfig, PretrainConfig};
pub use world::{DatasetSplits, SplitName, Task, WorldGraph, WorldSet};
