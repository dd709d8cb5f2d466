use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {what} at row {row}, column {col}")]
    NonFinite {
        what: String,
        row: usize,
        col: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("column `{column}` is not constant within cluster {cluster}")]
    NotClusterConstant { column: String, cluster: String },

    #[error("cross-validation fold {fold} has zero total weight")]
    EmptyFold { fold: usize },

    #[error("IRLS diverged at lambda index {lambda_index}")]
    IrlsDiverged { lambda_index: usize },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("covariance matrix could not be repaired to positive definite")]
    CovarianceUnrepairable,

    #[error("covariance factorization failed: {0}")]
    Factorization(String),

    #[error("design matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("binary column `{column}` has value {value} at row {row}")]
    NotBinary {
        column: String,
        row: usize,
        value: f64,
    },
}

impl Error {
    /// True for errors caused by malformed user input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::NonFinite { .. }
                | Error::Dimension(_)
                | Error::NotClusterConstant { .. }
                | Error::NotBinary { .. }
        )
    }
}
