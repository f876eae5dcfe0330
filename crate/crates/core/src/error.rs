use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{routine} did not converge for index {index} after {iterations} iterations")]
    NonConvergence {
        routine: &'static str,
        index: usize,
        iterations: usize,
    },

    #[error("spectral function is not finite at eigen-index {index} (lambda^2 = {value:e})")]
    SingularSpectrum { index: usize, value: f64 },

    #[error(
        "{what}: measured {measured:e} exceeds tolerance {tolerance:e} (tail estimate {tail:e})"
    )]
    Accuracy {
        what: String,
        measured: f64,
        tolerance: f64,
        tail: f64,
    },

    #[error("degenerate band: {0}")]
    DegenerateBand(String),

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error("truncation leak: tail mass {mass:e} of the highest Hermite mode beyond the grid exceeds {tolerance:e}")]
    TruncationLeak { mass: f64, tolerance: f64 },

    #[error("validation failed: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn precondition(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(LabError::Precondition(msg()))
    }
}
