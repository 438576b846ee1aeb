//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, CoreError>;

/// Errors emitted by the numerical and training components.
#[derive(Clone, Debug, PartialEq)]
pub enum CoreError {
    /// Two vectors that must share a length do not.
    LengthMismatch { expected: usize, got: usize },
    /// A vector with norm below the representable threshold was passed where
    /// a direction is required.
    ZeroNorm,
    /// Softmax temperature must be strictly positive.
    NonPositiveTemperature { got: f64 },
    /// Parameter and gradient (or accumulator) shapes disagree.
    ShapeMismatch { context: &'static str },
    /// A backward pass was given a cache from a different forward call.
    StaleCache,
    /// Momentum coefficients must lie in `[0, 1)`.
    MomentumOutOfRange { got: f64 },
    /// Soft assignment requires every bucket to hold at least one anchor.
    EmptyBucket { bucket: usize },
    /// All non-own buckets are empty, so no contrastive set exists.
    EmptyNegativePool,
    /// Fewer stored embeddings than requested draws.
    InsufficientPool { available: usize, requested: usize },
    /// Bucket label outside `[0, buckets)`.
    InvalidLabel { label: usize, buckets: usize },
    /// A sample's pseudo-label was recorded twice for the same epoch.
    DuplicateEpochUpdate { sample: usize, epoch: usize },
    /// Classifier target is not a probability vector.
    InvalidTarget { sum: f64 },
    /// An aggregate over an empty collection was requested.
    EmptyCollection,
    /// A probe split left some class without training samples.
    DegenerateSplit { class: usize },
    /// A configuration field violates its documented constraint.
    InvalidConfig(String),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            CoreError::ZeroNorm => write!(f, "vector norm below 1e-12"),
            CoreError::NonPositiveTemperature { got } => {
                write!(f, "temperature must be positive, got {got}")
            }
            CoreError::ShapeMismatch { context } => write!(f, "shape mismatch: {context}"),
            CoreError::StaleCache => write!(f, "forward cache does not match these parameters"),
            CoreError::MomentumOutOfRange { got } => {
                write!(f, "momentum must lie in [0, 1), got {got}")
            }
            CoreError::EmptyBucket { bucket } => {
                write!(f, "bucket {bucket} is empty; soft assignment undefined")
            }
            CoreError::EmptyNegativePool => write!(f, "no stored embedding outside the own bucket"),
            CoreError::InsufficientPool {
                available,
                requested,
            } => write!(
                f,
                "requested {requested} negatives but only {available} stored"
            ),
            CoreError::InvalidLabel { label, buckets } => {
                write!(f, "label {label} outside [0, {buckets})")
            }
            CoreError::DuplicateEpochUpdate { sample, epoch } => {
                write!(f, "sample {sample} already updated in epoch {epoch}")
            }
            CoreError::InvalidTarget { sum } => {
                write!(f, "target must sum to 1 within 1e-6, sums to {sum}")
            }
            CoreError::EmptyCollection => write!(f, "empty collection"),
            CoreError::DegenerateSplit { class } => {
                write!(f, "class {class} has no training samples after the split")
            }
            CoreError::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
        }
    }
}
