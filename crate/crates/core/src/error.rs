use thiserror::Error;

pub type Result<T, E = FlockError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FlockError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no finite flock diameter: V0 = {v0} is not below the alignment capacity {capacity}")]
    NoFiniteFlockDiameter { v0: f64, capacity: f64 },

    #[error("non-finite numeric input: {0}")]
    NonFinite(String),

    #[error("vacuum division at index {index}: phi*rho = {value:e} below floor {floor:e}")]
    VacuumDivision { index: usize, value: f64, floor: f64 },

    #[error("time step {dt:e} exceeds the CFL limit {limit:e}")]
    StepSize { dt: f64, limit: f64 },

    #[error("invalid bisection bracket: {0}")]
    Bracket(String),

    #[error("comparison envelope invalid: {0}")]
    EnvelopeInvalid(String),

    #[error("empty support")]
    EmptySupport,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl FlockError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        FlockError::Domain(msg.into())
    }
}
