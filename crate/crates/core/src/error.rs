use thiserror::Error;

/// Errors raised by the numerical routines and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A symmetric factorization failed. `min_pivot` is the smallest diagonal
    /// entry of the (symmetrized) input, which is usually enough to tell a
    /// scaling problem from a genuinely indefinite matrix.
    #[error("numerical error: {what} is not positive definite (dim {dim}, min diagonal {min_pivot:e})")]
    NotPositiveDefinite {
        what: &'static str,
        dim: usize,
        min_pivot: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("oracle did not converge: {0}")]
    Oracle(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
