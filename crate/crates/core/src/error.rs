use thiserror::Error;

use crate::state::Domain;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AtaError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("qubit count mismatch: {0} vs {1}")]
    QubitMismatch(u32, u32),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("statevector is in the {actual:?} domain, expected {expected:?}")]
    WrongDomain { expected: Domain, actual: Domain },

    #[error(
        "support violation: mask {mask:#b} has popcount {popcount} > 2 with coefficient {coeff:e}; \
         input is not piecewise quadratic"
    )]
    SupportViolation { mask: usize, popcount: u32, coeff: f64 },

    #[error("degenerate basis: Gram matrix is singular beyond ridge rescue")]
    DegenerateBasis,

    #[error("all children of the expansion frontier are already in the tree")]
    Exhausted,

    #[error("argument outside its domain: {0}")]
    DomainViolation(String),

    #[error("cannot normalize against an identically zero field")]
    DegenerateNormalization,

    #[error("heater and cooler windows overlap")]
    OverlappingWindows,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("zero vector has no direction")]
    ZeroVector,
}

pub type Result<T> = std::result::Result<T, AtaError>;
