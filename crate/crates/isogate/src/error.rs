//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A time grid is too coarse to resolve the drive frequencies.
    #[error("time grid under-resolved: {0}")]
    UnderResolvedGrid(String),

    /// A confusion matrix cannot be inverted (an error rate reaches 0.5).
    #[error("confusion matrix is singular (per-state error must be < 0.5)")]
    SingularConfusion,

    /// A fit design matrix is degenerate (e.g. all parity phases equal mod π).
    #[error("degenerate fit design: {0}")]
    DegenerateFit(String),

    /// A pulse program violates its structural rules.
    #[error("invalid pulse program: {0}")]
    InvalidProgram(String),

    /// An input value is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A required measurement setting is missing.
    #[error("missing measurement setting: {0}")]
    MissingSetting(String),

    /// An iterative routine hit its iteration cap; the best-so-far result is
    /// carried alongside by the caller where applicable.
    #[error("did not converge: {0}")]
    NonConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
