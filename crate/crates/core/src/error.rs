use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("partial likelihood undefined: no uncensored observations")]
    UndefinedLikelihood,

    #[error(
        "monotone likelihood: partial likelihood increases without bound \
         (|beta|_inf = {beta_norm:.3e} after {iterations} iterations, threshold {threshold:.3e})"
    )]
    MonotoneLikelihood { beta_norm: f64, iterations: usize, threshold: f64 },

    #[error("degenerate risk set at t = {0}")]
    DegenerateRiskSet(f64),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of numerical origin (non-convergence, divergence,
    /// singular systems) as opposed to bad inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_)
                | Error::MonotoneLikelihood { .. }
                | Error::DegenerateRiskSet(_)
                | Error::Singular(_)
                | Error::UndefinedLikelihood
        )
    }
}
