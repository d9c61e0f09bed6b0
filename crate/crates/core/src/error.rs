use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("user index {index} out of range for {users} users")]
    UserIndex { index: usize, users: usize },

    #[error("SINR must be nonnegative, got {0}")]
    NegativeSinr(f64),

    #[error("MSE must lie in (0, 1], got {0}")]
    MseOutOfRange(f64),

    #[error("SINR targets are infeasible: {0}")]
    InfeasibleTargets(String),

    #[error("cone program: {0}")]
    Solver(String),

    #[error("ML search space of {size} candidates exceeds the limit of {limit}")]
    ConstellationTooLarge { size: u128, limit: u128 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("experiment spec: {0}")]
    Spec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
