use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: truncation must be at least 2")]
    InvalidDimension(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("mode index {index} out of range for a {modes}-mode space")]
    ModeOutOfRange { index: usize, modes: usize },
    #[error("operands live on different Hilbert spaces")]
    SpaceMismatch,
    #[error("partial trace needs at least one kept mode")]
    EmptyKeep,
    #[error("operation requires a {expected}-mode space, got {got} modes")]
    WrongModeCount { expected: usize, got: usize },
    #[error("matrix is not Hermitian (max |A - A†| = {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("integration failed at t = {t} ps: {reason}")]
    Integration { t: f64, reason: String },
    #[error("g2 normalization undefined: <D_S> = {p_s:e}, <D_A> = {p_a:e}")]
    UndefinedNormalization { p_s: f64, p_a: f64 },
    #[error("heralding impossible: Stokes click probability is {0:e}")]
    HeraldImpossible(f64),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("fit did not converge after {iterations} iterations (best cost {cost:e})")]
    FitNotConverged { iterations: usize, cost: f64, best: Vec<f64> },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
