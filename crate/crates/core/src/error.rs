use thiserror::Error;

/// Errors produced by the estimation, inference and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("abscissae must be strictly increasing (violated at index {0})")]
    NotIncreasing(usize),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("weights must be strictly positive (index {0})")]
    NonPositiveWeight(usize),

    #[error("point {t} outside the domain ({lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error("iteration diverged: {0}")]
    Diverged(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("bandwidth too small: {0}")]
    BandwidthTooSmall(String),

    #[error("empty sample: {0}")]
    EmptySample(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("{what}[{i}] = {}", values[i]))),
        None => Ok(()),
    }
}
