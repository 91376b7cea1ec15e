use thiserror::Error;

use crate::world::NodeId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid world config: {0}")]
    InvalidWorldConfig(String),
    #[error("invalid world graph: {0}")]
    InvalidGraph(String),
    #[error("node {0} is not part of world {1}")]
    UnknownNode(NodeId, u32),
    #[error("node {to} is unreachable from {from}")]
    Unreachable { from: NodeId, to: NodeId },
    #[error("move from {from} to {to} does not follow an edge")]
    IllegalMove { from: NodeId, to: NodeId },
    #[error("frequency table is missing")]
    MissingFrequencyTable,
    #[error("token {0} is outside the vocabulary")]
    UnknownToken(String),
    #[error("task sampling failed: {0}")]
    Sampling(String),
    #[error("action {0} is not available in this state")]
    UnavailableAction(String),
    #[error("goal stack: {0}")]
    Stack(String),
    #[error("episode already terminated")]
    Terminated,
    #[error("all actions are masked")]
    AllMasked,
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("missing input: {0}")]
    Missing(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
