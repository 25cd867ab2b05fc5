use thiserror::Error;

/// Errors produced anywhere in the synthesis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is not strongly connected")]
    NotStronglyConnected,

    #[error("balancing vector has a nonpositive entry ({0:e})")]
    NonpositiveBalancing(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("matrix is numerically singular: {0}")]
    Singular(String),

    #[error("eigenvalue computation failed: {0}")]
    EigenFailure(String),

    #[error("simulation produced a non-finite state at t = {time}")]
    NonFinite { time: f64 },

    #[error("invalid simulation parameters: {0}")]
    InvalidSimulation(String),

    #[error("Hamiltonian has eigenvalues on the imaginary axis (no dichotomy)")]
    NoDichotomy,

    #[error("invariant subspace is not a graph subspace (condition number {0:e})")]
    NotGraphSubspace(f64),

    #[error("Riccati solution check failed: {0}")]
    RiccatiCheck(String),

    #[error("dimension {dim} exceeds the enumeration cap {cap}")]
    EnumerationCap { dim: usize, cap: usize },

    #[error("positive semidefinite solutions are Loewner-incomparable; no smallest one exists")]
    IncomparablePsd,

    #[error("exhaustive enumeration is required")]
    NotExhaustive,

    #[error("unstable-subspace set is not a sum of generalized eigenspaces: {0}")]
    NoInvariantComplement(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("antistabilizing solution absent")]
    AntistabilizingAbsent,

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
