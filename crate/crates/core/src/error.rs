use thiserror::Error;

/// Errors raised across identification, simulation and control.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("state channel {0} has zero variance")]
    ConstantChannel(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("non-uniform sampling at row {row}: spacing {spacing} vs dt {dt}")]
    NonUniformGrid { row: usize, spacing: f64, dt: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("non-finite value produced by {0}")]
    NonFiniteOutput(String),

    #[error("invalid test-function support: {0}")]
    InvalidSupport(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("rank-deficient least-squares problem")]
    RankDeficient,

    #[error("ensemble library bagging left no terms for dimension {0}")]
    EmptyReducedLibrary(usize),

    #[error("integration diverged at t = {0}")]
    Diverged(f64),

    #[error("zero quaternion")]
    ZeroQuaternion,

    #[error("infeasible bounds: {0}")]
    InfeasibleBounds(String),

    #[error("reference is identically zero")]
    ZeroReference,

    #[error("obstacle region masks every sample")]
    EmptyMask,

    #[error("time grids do not match")]
    GridMismatch,

    #[error("configuration error: {0}")]
    Config(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
