//! Error type shared across the crate.
//!
//! Variants split into two families: invalid inputs (rejected before any
//! compute) and numerical failures (detected during compute). The CLI maps
//! the former to exit code 1 and the latter to exit code 2.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spin magnitude must be a positive half-integer ≤ 2, got {0}")]
    InvalidSpin(f64),

    #[error("site index {site} outside lattice of {size} sites")]
    SiteOutOfRange { site: usize, size: usize },

    #[error("interaction range must be nonempty")]
    EmptyRange,

    #[error("lattice too small for pattern {pattern:?}: need L ≥ {min_l}, got {l}")]
    LatticeTooSmall {
        pattern: &'static str,
        min_l: u32,
        l: u32,
    },

    #[error("Hilbert dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("matrix is not Hermitian: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { defect: f64, tol: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("model is invalid: {0}")]
    InvalidModel(String),

    #[error("disorder sample is missing a draw for {0}")]
    MissingDraw(String),

    #[error("unknown term label {0:?}")]
    UnknownTerm(String),

    #[error("quadrature supports at most {max} Gaussian dimensions, model needs {dims}")]
    QuadratureDims { dims: usize, max: usize },

    #[error("invalid quadrature order {0}; need ≥ 1")]
    QuadratureOrder(usize),

    #[error("replica monomial is invalid: {0}")]
    InvalidMonomial(String),

    #[error("operation requires a classical (mutually commuting) model: {0}")]
    NotClassical(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors that indicate bad input rather than a failure during
    /// an otherwise valid computation.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Numerical(_) | Error::NotHermitian { .. })
    }
}
