use thiserror::Error;

/// Message attached to a DMB estimation attempt on a path that is not strictly positive.
pub const DMB_POSITIVITY_GUIDANCE: &str =
    "the DMB estimator needs a strictly positive path; the path has a value <= 0, use the LSB estimator instead";

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{DMB_POSITIVITY_GUIDANCE} (first offending index {index}, value {value})")]
    NonPositivePath { index: usize, value: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
