use thiserror::Error;

/// Errors produced by the library.
///
/// The variants are grouped so callers (the CLI, the C ABI) can map them onto
/// coarse exit or status codes with [`Error::is_numerical`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("order mismatch: expected {expected}, got {got}")]
    OrderMismatch { expected: usize, got: usize },

    #[error("parity mismatch between operands")]
    ParityMismatch,

    #[error("component buffer has length {got}, expected {expected}")]
    BadLength { expected: usize, got: usize },

    #[error("order {order} is too small to contract {k} index pairs")]
    OrderTooSmall { order: usize, k: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("odd order {0} has no Kronecker-delta basis")]
    OddOrder(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("order bound exceeded: {0}")]
    OrderBound(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("group membership residual {residual:e} exceeds tolerance {tolerance:e}")]
    NotInGroup { residual: f64, tolerance: f64 },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("resampling cap of {0} attempts reached")]
    ResampleCap(usize),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("equivariance audit failed: {0}")]
    AuditFailed(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_) | Error::ResampleCap(_) | Error::Eigen(_) | Error::Diverged(_) | Error::AuditFailed(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
