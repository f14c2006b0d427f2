use alloc::string::String;

/// Errors produced by the inference core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("argument {value} outside domain [{lower}, {upper}]")]
    Domain { value: f64, lower: f64, upper: f64 },
    #[error("event series invalid: {0}")]
    InvalidSeries(String),
    #[error("process is not stationary (branching ratio {0} >= 1)")]
    NonStationary(f64),
    #[error("transformed time {requested} beyond horizon mass {available}")]
    OutOfHorizon { requested: f64, available: f64 },
    #[error("root finding did not converge after {iterations} iterations (residual {residual:e}, target {target})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        target: f64,
    },
    #[error("optimizer stopped after {iterations} iterations with projected gradient {gradient:e}")]
    NotConverged { iterations: usize, gradient: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("sanity check failed: {0}")]
    SanityFailed(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = core::result::Result<T, Error>;
