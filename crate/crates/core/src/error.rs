//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Structurally malformed groupoid, measure, or bundle data.
    #[error("invalid construction: {0}")]
    InvalidConstruction(String),

    /// Unknown unit label or index.
    #[error("unknown unit: {0}")]
    UnknownUnit(String),

    /// Unknown arrow label or index.
    #[error("unknown arrow: {0}")]
    UnknownArrow(String),

    /// Two values were built over different groupoids.
    #[error("groupoid mismatch: {0}")]
    GroupoidMismatch(String),

    /// The unit measure fails quasi-invariance; the label names a witness arrow.
    #[error("measure is not quasi-invariant (witness arrow {0})")]
    NotQuasiInvariant(String),

    /// muPrime is not absolutely continuous with respect to mu.
    #[error("measure is not absolutely continuous (unit {0} carries mass outside the reference support)")]
    NotAbsolutelyContinuous(String),

    /// Vector or matrix shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Operation only defined for specific groupoid classes.
    #[error("unsupported groupoid class: {0}")]
    UnsupportedClass(String),

    /// Iterative solver hit its cap without meeting its tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// NaN or infinity in numeric input.
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    /// JSON parse or schema failure.
    #[error("parse error: {0}")]
    Parse(String),
}
