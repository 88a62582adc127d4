use thiserror::Error;

/// Errors raised by the lattice solver, the exit-time machinery and the
/// Monte Carlo harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("enumerating {steps} steps exceeds the cap of {cap}")]
    EnumerationCap { steps: usize, cap: usize },

    #[error("implicit scheme needs h * lip_f < 1, got {0}")]
    NotContractive(f64),

    #[error(
        "Picard iteration did not converge at node ({level}, {node}) after {iterations} iterations"
    )]
    NoConvergence {
        level: usize,
        node: usize,
        iterations: usize,
    },

    #[error("Laplace inversion unstable: {0}")]
    InversionUnstable(String),

    #[error("tail mass {tail_mass:e} above {threshold:e}; widen the grid")]
    TailMass { tail_mass: f64, threshold: f64 },

    #[error("length mismatch: {signs} signs but {taus} exit times")]
    LengthMismatch { signs: usize, taus: usize },

    #[error("non-positive error {value} at n = {n}; log-log fit undefined")]
    NonPositiveError { n: usize, value: f64 },

    #[error("malformed report: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(
            name,
            format!("must be finite and > 0, got {value}"),
        ))
    }
}
