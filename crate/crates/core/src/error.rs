use thiserror::Error;

use crate::basis::BasisError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: String, expected: usize, got: usize },
    #[error("solid node {node} at ({x}, {y}) lies outside the fluid domain")]
    OutsideDomain { node: usize, x: f64, y: f64 },
    #[error("solid triangle {triangle} is inverted (signed area {area:e})")]
    InvertedTriangle { triangle: usize, area: f64 },
    #[error("linear solver failed: {0}")]
    Solver(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("wall-clock budget of {0:.1} s exceeded")]
    Budget(f64),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by invalid input rather than a failed run.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Format(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
