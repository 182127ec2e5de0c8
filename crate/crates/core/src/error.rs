use thiserror::Error;

/// Errors raised by the ring, scheme, secure-array and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("polynomial domain mismatch: expected {expected}, found {found}")]
    DomainMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("level mismatch: {0} vs {1}")]
    LevelMismatch(usize, usize),
    #[error("invalid galois element {0} for ring dimension {1}")]
    InvalidGaloisElement(u64, usize),
    #[error("multiplicative level exhausted (level {0}); refresh required")]
    LevelExhausted(usize),
    #[error("too many values: {len} exceeds batch size {batch}")]
    TooManyValues { len: usize, batch: usize },
    #[error("non-finite input value at index {0}")]
    NonFinite(usize),
    #[error("no rotation key for index {0}")]
    MissingRotationKey(i64),
    #[error("operands belong to incompatible contexts")]
    ContextMismatch,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("data of length {len} exceeds capacity {capacity}")]
    CapacityExceeded { len: usize, capacity: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("refresh is disabled: context was not built with the insecure simulated bootstrap flag")]
    RefreshDisabled,
    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
