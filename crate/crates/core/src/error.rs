use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("invalid NOMA setup: {0}")]
    Setup(String),

    #[error("rank {rank} out of range 1..={n}")]
    RankOutOfRange { rank: usize, n: usize },

    #[error("hypergeometric parameter c = {c} is within 1e-9 of a nonpositive integer")]
    IllConditioned { c: f64 },

    #[error("argument z = {z} outside the supported domain z < 0.9")]
    Domain { z: f64 },

    #[error("closed form unavailable for alpha = {alpha}; quadrature required")]
    QuadratureRequired { alpha: f64 },

    #[error("quadrature did not converge: best estimate {best} with error estimate {error}")]
    NonConvergence { best: f64, error: f64 },

    #[error("series did not converge after {terms} terms")]
    SeriesNonConvergence { terms: usize },

    #[error("unsupported derivative order {order} (max {max})")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("unsupported expression: {0}")]
    Unsupported(String),

    #[error("rejection budget of {budget} attempts exhausted")]
    RejectionBudget { budget: usize },

    #[error("coverage result is already unconditional")]
    AlreadyUnconditional,

    #[error("{0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable discriminant, used by the CLI error record.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::Setup(_) => "setup",
            Error::RankOutOfRange { .. } => "rank_out_of_range",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::Domain { .. } => "domain",
            Error::QuadratureRequired { .. } => "quadrature_required",
            Error::NonConvergence { .. } => "non_convergence",
            Error::SeriesNonConvergence { .. } => "series_non_convergence",
            Error::UnsupportedOrder { .. } => "unsupported_order",
            Error::Unsupported(_) => "unsupported",
            Error::RejectionBudget { .. } => "rejection_budget",
            Error::AlreadyUnconditional => "already_unconditional",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
