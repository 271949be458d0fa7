use thiserror::Error;

/// Errors raised by the qPUF laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("total simulated dimension {requested} exceeds the configured cap {cap}")]
    DimensionCap { requested: usize, cap: usize },

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("zero vector cannot be normalized")]
    ZeroVector,

    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("matrix is not positive semi-definite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("dimension {dim} does not factor as {dims:?}")]
    NonFactorizable { dim: usize, dims: Vec<usize> },

    #[error("invalid subsystem selection: {0}")]
    InvalidSubsystems(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("post-selection impossible: stage-2 success probability {0:e}")]
    PostSelectionImpossible(f64),

    #[error("learning budget exceeded: budget {budget}")]
    BudgetExceeded { budget: usize },

    #[error("learning budget {budget} is insufficient, adversary needs {needed} queries")]
    InsufficientBudget { budget: usize, needed: usize },

    #[error("challenge violates mu-distinguishability: fidelity {fidelity} > 1 - mu = {limit}")]
    MuViolation { fidelity: f64, limit: f64 },

    #[error("adversary does not support this game mode: {0}")]
    UnsupportedMode(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
