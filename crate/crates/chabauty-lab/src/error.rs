use thiserror::Error;

/// Errors surfaced by the library. Numerical residuals above tolerance are
/// reported through dedicated variants so callers can distinguish "bad
/// input" from "algorithm lost precision".
#[derive(Debug, Error)]
pub enum Error {
    #[error("elements belong to different group models")]
    ModelMismatch,

    #[error("matrix has size {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not a group member: {reason} (residual {residual:.3e})")]
    NotInGroup { reason: String, residual: f64 },

    #[error("matrix is not an algebra member: {reason} (residual {residual:.3e})")]
    NotInAlgebra { reason: String, residual: f64 },

    #[error("principal logarithm undefined: spectrum meets the closed negative real axis")]
    LogBranch,

    #[error("factorization residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    FactorizationResidual { residual: f64, tol: f64 },

    #[error("eigenvalue pairing failed: {0}")]
    EigenPairing(String),

    #[error("subset is not contained in the base of simple roots")]
    InvalidSubset,

    #[error("invalid limit-group descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("invalid ball specification: {0}")]
    InvalidBall(String),

    #[error("sampled subgroup has no points")]
    EmptySample,

    #[error("sequence fails its convergence requirement: {0}")]
    NonConvergent(String),

    #[error("point is not in the chamber corner: {0}")]
    OutsideCorner(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization failure: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
