//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MemKernelError {
    #[error("matrix is singular to working precision")]
    SingularMatrix,
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("negative rate: {0}")]
    NegativeRate(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("operation unsupported for this distribution kind: {0}")]
    UnsupportedDistribution(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("infinite mean waiting time")]
    InfiniteMean,
    #[error("grid must be uniform with positive step")]
    NonUniformGrid,
    #[error("missing first waiting-time distribution for modified renewal process")]
    MissingFirstDistribution,
    #[error("Laplace check inconclusive: {0}")]
    Inconclusive(String),
}
