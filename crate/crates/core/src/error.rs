use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cycle detected through edge ({from} -> {to})")]
    CycleDetected { from: String, to: String },
    #[error("node `{node}` has more than one parent")]
    MultipleParents { node: String },
    #[error("node `{node}` is not reachable from the root")]
    DisconnectedNode { node: String },
    #[error("duplicate edge ({from} -> {to})")]
    DuplicateEdge { from: String, to: String },
    #[error("unknown node `{node}`")]
    UnknownNode { node: String },
    #[error("invalid staging: {0}")]
    InvalidStaging(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("unit `{unit}` has non-positive holding time {value}")]
    NonPositiveTime { unit: String, value: f64 },
    #[error("unit `{unit}` has {successes} successes out of {trials} trials")]
    InvalidCounts { unit: String, successes: u64, trials: u64 },
    #[error("partition covers {found} units but the data has {expected}")]
    PartitionMismatch { expected: usize, found: usize },
    #[error("exact search is capped at {cap} units, got {units}")]
    TooManyUnits { units: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    #[error("{rate:.3} of post-warmup transitions diverged")]
    DivergencePersistent { rate: f64 },
    #[error("log density is not finite at the initial point of chain {chain}")]
    NonFiniteDensity { chain: usize },
    #[error("need at least {needed} draws, found {found}")]
    InsufficientDraws { needed: usize, found: usize },
    #[error("proposal covariance is singular")]
    ProposalDegenerate,

    #[error("model search aborted: {0}")]
    SearchAborted(String),

    #[error("partitions are over different unit sets")]
    UnitSetMismatch,
    #[error("need at least {needed} units, found {found}")]
    TooFewUnits { needed: usize, found: usize },

    #[error("infeasible scenario: {0}")]
    InfeasibleConfig(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
