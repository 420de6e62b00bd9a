use thiserror::Error;

/// Errors raised by the numerical routines and the command-line driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("integral does not converge: {0}")]
    NonConvergentIntegral(String),

    #[error("rank {0} is not supported by this operation")]
    RankUnsupported(usize),

    #[error("value {value} is outside the support of the {channel} channel")]
    UnsupportedValue { channel: &'static str, value: f64 },

    #[error("channel expectation is not available: {0}")]
    NonIntegrableChannel(String),

    #[error("success probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("estimates diverged at iteration {iteration}: {reason}")]
    DivergedEstimates { iteration: usize, reason: String },

    #[error("order parameter is not positive semi-definite (smallest eigenvalue {0:e})")]
    NonPsdOrderParam(f64),

    #[error("no informative fixed point exists for these parameters")]
    NoInformativeFixedPoint,

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergentIntegral(_)
                | Error::DivergedEstimates { .. }
                | Error::NonPsdOrderParam(_)
                | Error::NoInformativeFixedPoint
                | Error::GridTooCoarse(_)
                | Error::NonIntegrableChannel(_)
                | Error::ProbabilityOutOfRange(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
