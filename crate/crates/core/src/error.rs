//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error enum. Variants map onto the failure modes of the
/// geometric kernels (span/tangency/branch checks), the samplers and the
/// statistical layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("group descriptor mismatch: {left} vs {right}")]
    DescriptorMismatch { left: String, right: String },

    #[error("matrix is not in the span of the algebra basis (residual {residual:.3e})")]
    NotInAlgebraSpan { residual: f64 },

    #[error("matrix does not represent a tangent vector at the base point (residual {residual:.3e})")]
    NotTangent { residual: f64 },

    #[error("matrix fails membership in {group} (residual {residual:.3e})")]
    NotOnGroup { group: String, residual: f64 },

    #[error("matrix is too far from {group} to project (distance {distance:.3e})")]
    ProjectionTooFar { group: String, distance: f64 },

    #[error("matrix lies in the wrong connected component of {group}")]
    WrongComponent { group: String },

    #[error("group logarithm of {group} element outside the injectivity radius ({distance:.6} >= {radius:.6})")]
    BranchCut {
        group: String,
        distance: f64,
        radius: f64,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("{0} does not admit a bi-invariant metric")]
    NoBiinvariantMetric(String),

    #[error("connection function is not skew-symmetric")]
    NotSkewSymmetric,

    #[error("metric factorization failed for {0}")]
    DegenerateMetric(String),

    #[error("time grids do not match")]
    GridMismatch,

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("degenerate ensemble: {0}")]
    DegenerateEnsemble(String),

    #[error("unknown registry name: {0}")]
    UnknownName(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed path frame: {0}")]
    MalformedFrame(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
