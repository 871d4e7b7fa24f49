use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("covariance is singular: smallest eigenvalue {lambda_min:e} <= threshold {threshold:e}")]
    SingularCovariance { lambda_min: f64, threshold: f64 },

    #[error("matrix is not symmetric: max |S - S^T| = {asymmetry:e}")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive semidefinite: smallest eigenvalue {lambda_min:e}")]
    NotPositiveSemidefinite { lambda_min: f64 },

    #[error("eigendecomposition residual {residual:e} exceeds tolerance")]
    Decomposition { residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension {0} is too small (need at least 2)")]
    DimensionTooSmall(usize),

    #[error("quadrature did not converge: error estimate {error_estimate:e} after {panels} panels")]
    QuadratureNonConvergence { error_estimate: f64, panels: usize },

    #[error("bound violated: {what}: {value} > {bound}")]
    BoundViolation {
        what: String,
        value: f64,
        bound: f64,
    },

    #[error("insufficient samples: need at least {required}, got {got}")]
    InsufficientSamples { required: usize, got: usize },

    #[error("lambda grid too wide: lambda * max|x| = {product} exceeds {limit}")]
    GridTooWide { product: f64, limit: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown bounded map {0:?}")]
    UnknownMap(String),

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("validation error at {path}: {message} (got {value})")]
    Validation {
        path: String,
        value: String,
        message: String,
    },

    #[error("refusing to overwrite {0} (pass --force)")]
    OutputExists(PathBuf),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, value: impl ToString, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            value: value.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
