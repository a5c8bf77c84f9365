use thiserror::Error;

/// Errors raised by the classification and verification pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("defining vector {0:?} is not tall (entries of both signs)")]
    NotTall(Vec<i64>),

    #[error("polynomial is not invariant: term with a-b = {0:?} is not a multiple of the defining vector")]
    NotInvariant(Vec<i64>),

    #[error("order {order} out of range 1..={max}")]
    OrderOutOfRange { order: u32, max: u32 },

    #[error("reduced Taylor polynomial does not vanish below the defining degree")]
    PrerequisiteVanishingFailed,

    #[error("point is not a critical point of g modulo the moment map")]
    NotCriticalModPhi,

    #[error("derivative unavailable: {0}")]
    DerivativeUnavailable(String),

    #[error("support pattern unsupported: coordinate {0} vanishes but carries a nonzero exponent")]
    UnsupportedSupport(usize),

    #[error("singularity conditions not met (cond 1 residual {c1:e}, cond 2 residual {c2:e})")]
    ConditionsNotMet { c1: f64, c2: f64 },

    #[error("moment map is not proper")]
    NotProper,

    #[error("moment level is empty")]
    EmptyFiber,

    #[error("reduced function is not Morse: {0}")]
    NotMorse(String),

    #[error("chart unsupported: {0}")]
    ChartUnsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown catalog entry {0:?}")]
    UnknownName(String),
}

pub type Result<T> = std::result::Result<T, Error>;
