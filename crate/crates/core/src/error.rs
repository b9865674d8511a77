use thiserror::Error;

/// Errors raised by the numerical kernels and the estimation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("accuracy target not reached: best estimate {estimate:e}, error bound {error:e}")]
    Accuracy { estimate: f64, error: f64 },

    #[error("hypergeometric form is degenerate at lambda = {lambda} (within 1e-6 of an integer); use the Gegenbauer form")]
    Degenerate { lambda: f64 },

    #[error("likelihood maximum at the bracket edge: beta = {beta:e} in [{lo:e}, {hi:e}]")]
    BracketEdge { beta: f64, lo: f64, hi: f64 },

    #[error("tabulated CDF is not monotone (drop of {0:e})")]
    NonMonotoneCdf(f64),

    #[error("invalid state descriptor `{0}`")]
    Descriptor(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Accuracy { .. } | Error::NonMonotoneCdf(_) | Error::BracketEdge { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
