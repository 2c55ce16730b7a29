use thiserror::Error;

/// Errors shared by the data, model, sampler, and study layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at data row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error(
        "MAP search did not converge within {evaluations} evaluations \
         (best log-posterior {best_log_post})"
    )]
    MapDidNotConverge {
        evaluations: usize,
        best_log_post: f64,
        best_point: Vec<f64>,
    },

    #[error("non-finite Hessian entry at ({row}, {col})")]
    NonFiniteHessian { row: usize, col: usize },

    #[error("non-finite deviance at retained draw {draw}")]
    NonFiniteDeviance { draw: usize },

    #[error("chain has no retained draws")]
    EmptyChain,

    #[error(
        "potential scale reduction needs at least two chains; \
         split a single chain in half via split_gelman_rubin"
    )]
    SingleChain,
}

impl Error {
    pub fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
