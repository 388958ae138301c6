//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by planning, channel generation, and the solver.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// The fronthaul capacity cannot support even the minimum bit allocation.
    #[error("fronthaul capacity {capacity} bits/use too small: {context}")]
    CapacityTooSmall { capacity: f64, context: &'static str },

    /// A vector or matrix had an unexpected dimension.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// Zero-forcing needs the aggregate channel to have full column rank.
    #[error("aggregate channel rank deficient: {users} users but only {dims} antenna dimensions")]
    RankDeficient { users: usize, dims: usize },

    /// A linear system could not be factorized.
    #[error("singular linear system in {0}")]
    SingularSystem(&'static str),

    /// An operation that needs a nonzero precoder received the zero vector.
    #[error("zero precoding vector in {0}")]
    ZeroVector(&'static str),

    /// A quadratic form that must be positive came out nonpositive.
    #[error("nonpositive quadratic form ({context}: {value})")]
    NonPositiveForm { context: &'static str, value: f64 },

    /// The second-order test is only meaningful near a stationary point.
    #[error("not stationary: residual {residual:.3e} exceeds 10x tolerance {tolerance:.3e}")]
    NotStationary { residual: f64, tolerance: f64 },

    /// The sparse-JT support contained no active (RRH, user) pair.
    #[error("empty support: no active (rrh, user) pairs")]
    EmptySupport,

    /// Configuration violates a documented invariant.
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
