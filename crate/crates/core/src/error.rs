use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("step {dt} does not tile the interval of length {length} (ratio {ratio})")]
    NonCommensurateStep { dt: f64, length: f64, ratio: f64 },

    #[error("invalid grid parameters: {0}")]
    InvalidGrid(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("invalid problem parameters: {0}")]
    InvalidProblem(String),

    #[error("time {t} outside the domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error("sharpness parameter must be positive, got {0}")]
    BadSharpness(f64),

    #[error("empty input")]
    EmptyInput,

    #[error("empty window")]
    EmptyWindow,

    #[error("lower bound exceeds upper bound in component {component}: {lo} > {hi}")]
    BadBounds { component: usize, lo: f64, hi: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite state at t = {t} (component {component})")]
    NonFinite { t: f64, component: usize },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("smoothing weights unavailable and no sharpness parameter supplied")]
    MissingWeights,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("assertion failed: {0}")]
    AssertionFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
