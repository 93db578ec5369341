use thiserror::Error;

/// Errors surfaced by model construction, propagation, and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model is time-dependent; {0}")]
    TimeDependent(&'static str),

    #[error("trace drifted to {trace} at t = {t} s (beyond 1e-6); reduce the step size")]
    TraceDrift { t: f64, trace: f64 },

    #[error("state norm fell to {norm2} at t = {t} s between jumps; reduce the step size")]
    NormUnderflow { t: f64, norm2: f64 },

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("did not converge: {0}")]
    Convergence(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
