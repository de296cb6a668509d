use thiserror::Error;

/// Errors raised by the model, geodesic, causality, homotopy and ray operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed model spec: {0}")]
    MalformedSpec(String),
    #[error("metric signature check failed at {coords:?}: {reason}")]
    SignatureCheckFailure { coords: Vec<f64>, reason: String },
    #[error("conformal factor {value} is not positive at {coords:?}")]
    NonpositiveConformalFactor { coords: Vec<f64>, value: f64 },
    #[error("hole {index} centered at {center:?} lies outside the base domain")]
    HoleOutsideDomain { index: usize, center: Vec<f64> },
    #[error("expected {expected} coordinates, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("direction is not future null (g(v,v) = {norm}, future = {future})")]
    NonNullDirection { norm: f64, future: bool },
    #[error("start event {0:?} is outside the domain")]
    StartOutsideDomain(Vec<f64>),
    #[error("step must be positive, got {0}")]
    StepNonpositive(f64),
    #[error("event {0:?} is outside the domain")]
    EventOutsideDomain(Vec<f64>),
    #[error("fan size {k} is invalid for spatial dimension {m}")]
    InvalidFanSize { k: usize, m: usize },
    #[error("events are identical")]
    IdenticalEvents,
    #[error("chord {index} of the curve is not future causal")]
    NoncausalChord { index: usize },
    #[error("breakpoints do not partition the curve parameter: {0}")]
    InvalidBreakpoints(String),
    #[error("backend `{backend}` is unsupported for model kind `{kind}`")]
    BackendUnsupported { backend: &'static str, kind: String },
    #[error("box corner {0:?} is outside the chart domain")]
    BoxOutsideDomain(Vec<f64>),
    #[error("graph needs a node budget of at least 2, got {0}")]
    NodeBudgetTooSmall(usize),
    #[error("sequence does not converge: tail spread {spread} exceeds {tolerance}")]
    NonconvergentSequence { spread: f64, tolerance: f64 },
    #[error("scan endpoints invalid: {0}")]
    EndpointsInvalid(String),
    #[error("grid_n must be at least 11, got {0}")]
    GridTooCoarse(usize),
    #[error("parameter {0} is outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("y lies inside the neighbourhood U of x")]
    YInsideNeighborhood,
    #[error("ray is not contained in the ambient model: {0}")]
    RayNotInAmbient(String),
    #[error("sub-model is not a restriction of the ambient model")]
    NotARestriction,
    #[error("pair lies outside the sub-model domain")]
    PairOutsideSubDomain,
}

pub type Result<T> = std::result::Result<T, Error>;
