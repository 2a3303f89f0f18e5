use thiserror::Error;

/// Errors produced by the numerical kernels.
///
/// Variants split into two families: input validation (the caller handed us
/// something outside an operation's domain) and numerical failure (the inputs
/// were well-formed but the computation could not proceed). The CLI maps the
/// two families to different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{} validation errors: {}", .0.len(), .0.join("; "))]
    Violations(Vec<String>),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("metric is not symmetric at node {node} (|h_ab - h_ba| = {asymmetry:e})")]
    NonSymmetric { node: usize, asymmetry: f64 },

    #[error("metric is singular at node {node} (smallest pivot {pivot:e})")]
    Singular { node: usize, pivot: f64 },

    #[error("metric is not positive definite at node {node}")]
    NotPositiveDefinite { node: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value in {term} at {location}")]
    NonFinite { term: String, location: String },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Invalid(_)
                | Error::Violations(_)
                | Error::GridMismatch(_)
                | Error::NonSymmetric { .. }
                | Error::Domain(_)
                | Error::Io { .. }
                | Error::Format { .. }
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
