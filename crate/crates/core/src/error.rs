use thiserror::Error;

pub type Result<T> = std::result::Result<T, GasError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GasError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular point: {0}")]
    SingularPoint(String),

    #[error("truncation domain too small: boundary mass {boundary_mass:.3e} exceeds {limit:.3e}")]
    DomainTooSmall { boundary_mass: f64, limit: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64, history: Vec<f64> },

    #[error("divergent energy: {0}")]
    DivergentEnergy(String),

    #[error("coincident particles at indices {0} and {1}")]
    CoincidentParticles(usize, usize),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty sample set: {0}")]
    EmptySample(String),

    #[error("edge frame condition {condition} violated: margin {margin:.3e} exceeds {threshold:.3e}")]
    FrameCondition { condition: &'static str, margin: f64, threshold: f64 },
}

impl GasError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        GasError::InvalidParameter { name, reason: reason.into() }
    }
}
