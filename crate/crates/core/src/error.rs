use thiserror::Error;

/// An argument fell outside the domain an operation is defined on.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error: {0}")]
pub struct DomainError(pub String);

impl DomainError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocationError {
    #[error("unknown task {0}")]
    UnknownTask(usize),
    #[error("task {0} is not available to any agent")]
    UncoveredTask(usize),
    #[error("reward for agent {agent}, task {task} is not finite")]
    NonFiniteReward { agent: usize, task: usize },
    #[error("no weight above threshold for tasks {0:?}")]
    IncompleteAssignment(Vec<usize>),
    #[error("perturbation scale {scale} is not below half the smallest reward gap {gap}")]
    PerturbationTooLarge { scale: f64, gap: f64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid grid: {0}")]
    Invalid(String),
    #[error("map generation failed: {0}")]
    Generation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph is not strongly connected")]
    Disconnected,
    #[error("agent {0} out of range")]
    BadAgent(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("start cell {0:?} is not traversable")]
    BlockedStart((usize, usize)),
    #[error("goal cell {0:?} is not traversable")]
    BlockedGoal((usize, usize)),
    #[error("no path found within {0} iterations")]
    NoPath(usize),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
