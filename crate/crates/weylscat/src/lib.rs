//! Numerical scattering theory for matrix-valued Nevanlinna (Weyl) functions.
//!
//! The crate evaluates closed-form Herglotz models together with their exact
//! real-axis boundary values, computes scattering matrices and spectral shift
//! functions for selfadjoint, dissipative and coupled extension parameters,
//! and verifies the classical and modified Birman-Krein and trace identities
//! on λ-grids.

pub mod cli;
pub mod coupled;
pub mod dissipative;
pub mod linalg;
pub mod matfun;
pub mod model_io;
pub mod nevanlinna;
pub mod quadrature;
pub mod sa_scatter;

pub use linalg::CMatrix;
pub use nevanlinna::{HerglotzTerm, NevanlinnaModel};

use thiserror::Error;

/// Crate-wide error type. Variants map onto the CLI exit codes: parse/IO
/// problems exit 3, validation problems exit 1, numerical failures exit 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("exceptional point: lambda = {lambda} is within tolerance of {what}")]
    ExceptionalPoint { lambda: f64, what: String },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// A grid point excluded from a sweep or verification, with the reason.
#[derive(Debug, Clone)]
pub struct SkippedPoint {
    pub lambda: f64,
    pub reason: String,
}
