use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("near-degenerate spectrum: minimum eigenvalue gap {gap:.3e} below {threshold:.3e}")]
    NearDegenerateSpectrum { gap: f64, threshold: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} sweeps")]
    ConvergenceFailure { iterations: usize },

    #[error("matrix is singular to working precision (rcond = {rcond:.3e})")]
    SingularMatrix { rcond: f64 },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("zero gap between the A and B diagonal entries")]
    ZeroGap,

    #[error("generator is not block diagonal (off-diagonal block norm {magnitude:.3e})")]
    NotBlockDiagonal { magnitude: f64 },

    #[error("integration step too large: local error estimate {estimate:.3e} exceeds budget {budget:.3e}")]
    StepTooLarge { estimate: f64, budget: f64 },

    #[error("initial state has no weight in subspace B (population {population:.3e})")]
    EmptyBSupport { population: f64 },

    #[error("B-subspace population vanished at t = {time} (population {population:.3e})")]
    BSupportVanished { time: f64, population: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
