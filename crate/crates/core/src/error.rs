//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not fit together.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An operator that must be Hermitian is not.
    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    /// A matrix failed the density-matrix checks.
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An eigen-decomposition or factorization did not converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The coincidence probability vanished, so the visibility is undefined.
    #[error("visibility undefined: coincidence probability is zero")]
    UndefinedVisibility,

    /// The equality constraints of the entropy program admit no state.
    #[error("entropy program infeasible: {0}")]
    Infeasible(String),

    /// The entropy program solver failed to produce a certified bound.
    #[error("solver failure: {0}")]
    Solver(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
