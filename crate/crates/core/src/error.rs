use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("grid extent {x_max} does not cover wells at separation {d} (need at least {required})")]
    GridTooSmall { x_max: f64, d: f64, required: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time {t} outside trajectory [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("could not assign a definite symmetry label: {0}")]
    Unclassifiable(String),

    #[error("branch tracking ambiguous at d = {d}: best overlap {overlap:.4}")]
    TrackingAmbiguity { d: f64, overlap: f64 },

    #[error("insufficient well separation: {0}")]
    InsufficientSeparation(String),

    #[error("branches unresolved: {0}")]
    UnresolvedBranches(String),

    #[error("linear solve did not converge at t = {t} (residual {residual:.3e})")]
    LinearSolve { t: f64, residual: f64 },

    #[error("boundary leakage {leakage:.3e} exceeds limit {limit:.1e}")]
    BoundaryLeakage { leakage: f64, limit: f64 },

    #[error("input state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("matrix is not unitary (residual {0:.3e})")]
    NotUnitary(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that come from the numerics rather than from user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::Unclassifiable(_)
                | Error::TrackingAmbiguity { .. }
                | Error::UnresolvedBranches(_)
                | Error::LinearSolve { .. }
                | Error::BoundaryLeakage { .. }
                | Error::InsufficientSeparation(_)
        )
    }
}
