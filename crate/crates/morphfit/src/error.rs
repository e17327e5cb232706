//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Polynomial order outside the supported range for a basis or rule.
    #[error("unsupported polynomial order {order}: {msg}")]
    InvalidOrder { order: usize, msg: String },

    /// Geometry kind not supported by the requested operation.
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    /// A structurally invalid mesh: bad connectivity, nonpositive Jacobian,
    /// inconsistent sizes.
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    /// Parse failure in one of the text formats, with a 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Unknown or unsupported format version tag.
    #[error("unsupported format version: {0}")]
    UnsupportedVersion(String),

    /// Quality metric evaluated at a degenerate matrix argument.
    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    /// A point fell outside the domain covered by a field or mesh.
    #[error("point ({0}, {1}, {2}) is outside the domain")]
    OutOfDomain(f64, f64, f64),

    /// The requested fit node set is empty.
    #[error("empty fit node set: {0}")]
    EmptyFitSet(String),

    /// The line search exhausted its step halvings without an acceptable step.
    #[error("line search failed after {halvings} halvings: {msg}")]
    LineSearchFailure { halvings: usize, msg: String },

    /// A singular matrix where an invertible one was required.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// Invalid argument or configuration value.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
