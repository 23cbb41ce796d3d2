use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid chain size {n_sites}: {reason}")]
    InvalidSize { n_sites: usize, reason: &'static str },

    #[error("invalid protocol time {0}: must be positive and finite")]
    InvalidTime(f64),

    #[error("shape mismatch: expected {expected} {what}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("canonical diagonalization failed, residual norm {residual:.3e}")]
    Diagonalization { residual: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite entries after {steps} steps at t = {time}")]
    NumericalBlowup { steps: u64, time: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
