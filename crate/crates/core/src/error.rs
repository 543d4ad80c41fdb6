use thiserror::Error;

/// Which hypothesis of the controllable-schedule construction failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Precondition {
    /// The input (or, for sensor schedules, measurement) matrix must have rank n.
    FullRowRank { rank: usize, n: usize },
    /// Sparsity budget must satisfy s >= max(1, n - rank(A)).
    SparsityTooSmall { s: usize, required: usize },
    /// Horizon must satisfy K >= ceil(n / s).
    HorizonTooShort { k: usize, required: usize },
}

impl std::fmt::Display for Precondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Precondition::FullRowRank { rank, n } => {
                write!(f, "matrix must have full row rank {n}, got rank {rank}")
            }
            Precondition::SparsityTooSmall { s, required } => {
                write!(f, "sparsity {s} is below max(1, n - rank(A)) = {required}")
            }
            Precondition::HorizonTooShort { k, required } => {
                write!(f, "horizon {k} is below ceil(n / s) = {required}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("schedule does not ensure controllability (rank {rank} < {n})")]
    NotControllable { rank: usize, n: usize },

    #[error("precondition violated: {0}")]
    Precondition(Precondition),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("MSE bound undefined: 2 xi^s ||A||^2 = {chi} >= 1 (minimum sparsity {required_min_s:?})")]
    BoundUndefined {
        chi: f64,
        required_min_s: Option<usize>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn dims(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
