use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("kernel metric radicand is negative ({0:e}); kernel configuration is invalid")]
    NegativeRadicand(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("eigensolver did not converge within {0} iterations")]
    EigenNonConvergence(usize),

    #[error("matrix is not positive definite")]
    Factorization,

    #[error("scenario count exceeds {0}; violation level is too close to zero")]
    ScenarioOverflow(u64),

    #[error("confidence interval collapsed for output {output} at grid point {point}: lower {lower} > upper {upper}")]
    ConfidenceCollapse {
        output: usize,
        point: usize,
        lower: f64,
        upper: f64,
    },

    #[error("no candidate in the union of maximizers and expanders")]
    EmptyAcquisitionSet,

    #[error("optimizer already terminated")]
    Terminated,

    #[error("objective evaluation failed: {0}")]
    Objective(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
