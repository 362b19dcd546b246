use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("config parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("mission `{mission}` is unsatisfiable: {check}")]
    Unsatisfiable { mission: String, check: String },
    #[error("step called on a terminal environment")]
    StepAfterTerminal,
    #[error("snapshot incompatible with this environment: {0}")]
    SnapshotMismatch(String),
    #[error("malformed snapshot: {0}")]
    MalformedSnapshot(String),
    #[error("planner failed on a satisfiable mission: {0}")]
    PlannerFailure(String),
    #[error("training diverged at step {step}: {what}")]
    Divergence { step: usize, what: String },
    #[error("trajectory budget exceeded: {total} > {budget}; feasible (N, p): {alternatives:?}")]
    Budget {
        total: usize,
        budget: usize,
        alternatives: Vec<(usize, usize)>,
    },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("{0}")]
    Invalid(String),
    #[error("term count {terms} exceeds limit {limit}; reduce depth")]
    TermBlowup { terms: u128, limit: u128 },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
