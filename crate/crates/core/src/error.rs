use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain specification: {0}")]
    InvalidSpec(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coefficient field has off-diagonal entries at {point:?}; only diagonal anisotropy is supported")]
    UnsupportedAnisotropy { point: Vec<f64> },

    #[error("coefficient eigenvalue {value} below ellipticity floor {floor} at {point:?}")]
    EllipticityViolation { point: Vec<f64>, value: f64, floor: f64 },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    MaxIterationsExceeded { iterations: usize, residual: f64 },

    #[error("hierarchy level {level}: {source}")]
    HierarchySolve { level: usize, source: Box<Error> },

    #[error("hierarchy level {level} has a non-positive entry {value:e} at node {index}")]
    NegativeEntry { level: usize, index: usize, value: f64 },

    #[error("eigenpair {index} did not converge (residual {residual:e})")]
    ConvergenceFailure { index: usize, residual: f64 },

    #[error("insufficient moments: need T_{needed}, have {available}")]
    InsufficientMoments { needed: usize, available: usize },

    #[error("variance norm must be positive, got {0:e}")]
    NonpositiveVariance(f64),

    #[error("admissible function has zero mean")]
    ZeroMean,

    #[error("hierarchy depth {available} is below the required order {needed}")]
    InsufficientDepth { needed: usize, available: usize },

    #[error("starting point {0:?} is not inside the domain")]
    StartOutsideDomain(Vec<f64>),

    #[error("{censored} of {paths} paths hit the step cap (fraction above 1e-3)")]
    ExcessiveCensoring { censored: u64, paths: u64 },

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    /// Numerical failures as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::MaxIterationsExceeded { .. }
                | Error::HierarchySolve { .. }
                | Error::NegativeEntry { .. }
                | Error::ConvergenceFailure { .. }
                | Error::NonpositiveVariance(_)
                | Error::ExcessiveCensoring { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
