use std::path::PathBuf;

use crate::grid_world::AgentId;

pub type Result<T, E = PursuitError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum PursuitError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown agent id {0}")]
    UnknownAgent(AgentId),
    #[error("agent {0} is no longer in play")]
    DeadAgent(AgentId),
    #[error("action {action} is not allowed for agent {agent}")]
    ActionNotAllowed { agent: AgentId, action: String },
    #[error("world has no pursuers")]
    NoPursuers,
    #[error("world has no alive evaders")]
    NoAliveEvaders,
    #[error("membership matrix is empty")]
    EmptyMatrix,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("k = {k} is out of range for {rows} rows")]
    InvalidK { k: usize, rows: usize },
    #[error("unknown clustering method `{0}`")]
    UnknownMethod(String),
    #[error("unknown case `{0}`")]
    UnknownCase(String),
    #[error("evader group is empty")]
    EmptyGroup,
    #[error("cluster assignment is empty")]
    EmptyAssignment,
    #[error("assignment does not cover alive evader {0}")]
    UncoveredEvader(AgentId),
    #[error("configs do not share scenario parameters: {0}")]
    MismatchedScenario(String),
    #[error("run with seed {seed} failed: {source}")]
    Run {
        seed: u64,
        #[source]
        source: Box<PursuitError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PursuitError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        PursuitError::InvalidConfig(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PursuitError::Io {
            path: path.into(),
            source,
        }
    }
}
