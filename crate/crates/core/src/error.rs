use thiserror::Error;

/// Errors raised anywhere in the core crate.
///
/// Validation failures (bad shapes, out-of-range parameters, size guards)
/// are separated from numeric failures (non-convergence, NaN) so that callers
/// such as the CLI can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("matrix is not symmetric: entries ({i},{j}) and ({j},{i}) differ by {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },

    #[error("{what} is {got}, the limit is {max}")]
    TooLarge { what: &'static str, got: usize, max: usize },

    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NoConvergence(_) | Error::NonFinite(_))
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
