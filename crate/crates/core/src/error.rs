use thiserror::Error;

/// Errors raised while building, fitting or simulating grey models.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GreyError {
    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The regression design is numerically rank deficient.
    #[error("singular design matrix (normal-matrix condition estimate {condition:.3e})")]
    SingularDesign { condition: f64 },

    /// A trajectory diverged before reaching the requested sample time.
    #[error("trajectory blew up before sample {index} (t = {time})")]
    BlowUp { index: usize, time: f64 },

    #[error("closed form is singular at t = {0}")]
    Singularity(f64),

    #[error("root search failed: {0}")]
    RootSearch(String),

    #[error("optimizer did not converge: {0}")]
    NoConvergence(String),

    #[error("every candidate failed: {0}")]
    AllCandidatesFailed(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
}

impl GreyError {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        GreyError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            GreyError::InvalidSeries(_) => "invalid_series",
            GreyError::InvalidSpec(_) => "invalid_spec",
            GreyError::Dimension(_) => "dimension",
            GreyError::Domain(_) => "domain",
            GreyError::SingularDesign { .. } => "singular_design",
            GreyError::BlowUp { .. } => "blow_up",
            GreyError::Singularity(_) => "singularity",
            GreyError::RootSearch(_) => "root_search",
            GreyError::NoConvergence(_) => "no_convergence",
            GreyError::AllCandidatesFailed(_) => "all_candidates_failed",
            GreyError::InvalidArgument(_) => "invalid_argument",
            GreyError::Config { .. } => "config",
        }
    }
}

pub type Result<T> = std::result::Result<T, GreyError>;
