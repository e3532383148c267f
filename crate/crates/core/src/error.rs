use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("directed cycle through nodes {0:?}")]
    Cycle(Vec<usize>),

    #[error("noise variance of node {node} is {value}, must be strictly positive")]
    NonPositiveVariance { node: usize, value: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("covariance is singular (smallest eigenvalue must be non-zero): {0}")]
    Singular(String),

    #[error("matrix is not symmetric: max deviation {0:e}")]
    Asymmetric(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{0}")]
    TooLarge(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors that come from the numerics rather than from how the tool was invoked.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite(_)
                | Error::Singular(_)
                | Error::Numerical(_)
                | Error::Cycle(_)
                | Error::NonPositiveVariance { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
