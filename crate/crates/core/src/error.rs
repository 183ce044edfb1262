use thiserror::Error;

/// Failure modes shared by every numerical routine in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate metric: psi <= 0 at interior node {index}")]
    DegenerateMetric { index: usize },
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("degenerate energy: F vanished during iteration {iteration}")]
    DegenerateEnergy { iteration: usize },
    #[error("domain monotonicity violated: lambda grew from {previous} to {current} at radius {radius}")]
    DomainMonotonicityViolation {
        radius: f64,
        previous: f64,
        current: f64,
    },
    #[error("insufficient domain: {0}")]
    InsufficientDomain(String),
    #[error("singularity detected at t = {time} (node {index})")]
    SingularityDetected { time: f64, index: usize },
    #[error("mass drift {drift:e} exceeds limit at t = {time}")]
    MassDrift { time: f64, drift: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
