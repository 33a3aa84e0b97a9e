use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("grid axis {axis} needs at least 2 cells, got {n}")]
    GridTooSmall { axis: &'static str, n: usize },
    #[error("grid bounds describe an empty interval")]
    EmptyInterval,
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for config key `{key}`")]
    BadValue { key: String, value: String },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("kernel variance vanishes at r = s = 0")]
    ZeroVariance,
    #[error("localisation parameter must be > 0, got {0}")]
    BadEps(f64),
    #[error("field grid does not match the stencil grid")]
    GridMismatch,
}

#[derive(Debug, Error, PartialEq)]
pub enum FvError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("initial support covers no cell center")]
    EmptySupport,
    #[error("non-finite value in solver input")]
    NonFinite,
    #[error("cell {index} went negative ({value:e}) at t = {time}; time step violates the CFL bound")]
    Negative { index: usize, value: f64, time: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum MicroError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("runs do not share output times")]
    MismatchedTimes,
    #[error("no runs to average")]
    NoRuns,
}

#[derive(Debug, Error, PartialEq)]
pub enum ObservableError {
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("reference norm is zero; relative error undefined")]
    ZeroReference,
    #[error("series do not share output times")]
    TimeMismatch,
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
}
