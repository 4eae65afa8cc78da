use thiserror::Error;

/// Errors raised by simulation and estimation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("circulant embedding is not nonnegative definite (most negative eigenvalue {min_eigenvalue:e})")]
    EmbeddingFailed { min_eigenvalue: f64 },

    #[error("dense covariance factorization failed: {0}")]
    Factorization(String),

    #[error("double-sum diagnostic needs at least two blocks, got {blocks}")]
    TooFewBlocks { blocks: usize },

    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Fails with `InvalidParameter` unless `cond` holds.
pub(crate) fn ensure(cond: bool, name: &'static str, reason: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(invalid(name, reason()))
    }
}
