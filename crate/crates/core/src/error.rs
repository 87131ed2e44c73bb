//! Error type shared by every module.

use thiserror::Error;

/// Failures raised by the solvers, models and I/O helpers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum WptError {
    #[error("argument outside the function domain: {0}")]
    Domain(String),
    #[error("root not bracketed: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    Bracket { f_lo: f64, f_hi: f64 },
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("sampling too coarse: {samples} samples per period, need at least {required}")]
    Sampling { samples: usize, required: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("channel shape not supported: {0}")]
    Shape(String),
    #[error("delay spread {spread:.3e} s violates the narrowband limit 1/f_w = {limit:.3e} s")]
    Narrowband { spread: f64, limit: f64 },
    #[error("moment order {0} not supported")]
    Order(usize),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("signal is stochastic: {0}")]
    RandomSignal(String),
    #[error("channel is zero on tone {0}")]
    ZeroChannel(usize),
    #[error("degenerate problem: {0}")]
    Degenerate(String),
    #[error("L = {l} is not divisible by group size {group}")]
    Divisibility { l: usize, group: usize },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl WptError {
    pub(crate) fn param(field: &str, reason: impl Into<String>) -> Self {
        WptError::InvalidParameter { field: field.to_string(), reason: reason.into() }
    }
}

impl From<std::io::Error> for WptError {
    fn from(e: std::io::Error) -> Self {
        WptError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for WptError {
    fn from(e: serde_json::Error) -> Self {
        WptError::Io(e.to_string())
    }
}

impl From<csv::Error> for WptError {
    fn from(e: csv::Error) -> Self {
        WptError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, WptError>;
