use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain of the requested object.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input for which the estimator is undefined (for example an all-zero path).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A residual variance of exactly zero; the log criterion would be -inf.
    #[error("zero residual variance (k = {k}): log criterion is -inf")]
    ZeroVariance { k: u8 },

    /// A simulated path left the finite range of f64.
    #[error("magnitude overflow at t = {t}")]
    MagnitudeOverflow { t: usize },

    /// An intermediate value in a closed-form evaluation was not finite.
    #[error("numeric range error: {0}")]
    NumericRange(String),

    #[error("quadrature did not converge: achieved error estimate {estimate:e} (target {target:e})")]
    Quadrature { estimate: f64, target: f64 },

    #[error("non-monotone binding function near c = {c}")]
    NonMonotone { c: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures that a Monte Carlo cell counts and excludes rather
    /// than aborting on.
    pub fn is_degenerate_draw(&self) -> bool {
        matches!(
            self,
            Error::Degenerate(_) | Error::ZeroVariance { .. } | Error::MagnitudeOverflow { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
