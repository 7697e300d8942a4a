use crate::spectral::EigenResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid spacing {h} is degenerate for a domain of extent {extent}")]
    DegenerateGrid { h: f64, extent: f64 },

    #[error("value {t} exceeds the domain measure {measure}")]
    OutOfRange { t: f64, measure: f64 },

    #[error("negative values are not allowed here (minimum {min})")]
    NegativeValues { min: f64 },

    #[error("compatibility violated: the load integrates to {defect}, expected 0")]
    Compatibility { defect: f64 },

    #[error("eigen solver did not converge after {} iterations (best estimate {})", .0.iterations, .0.lambda0)]
    EigenNotConverged(Box<EigenResult>),

    #[error("{what} did not converge after {iterations} iterations")]
    NotConverged { what: &'static str, iterations: usize },

    #[error("failed to bracket: {0}")]
    Bracket(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
