//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failure modes of the numerical laboratory.
///
/// Every fallible operation returns this type; none of the numerical kernels
/// panic on bad input.
#[derive(Debug, Error)]
pub enum Error {
    /// The argument lies outside the mathematical domain of the operation,
    /// e.g. a radius at or below the singular point r = 0.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition was violated, e.g. the pointwise constraint
    /// f^2 + k^2 a^2 = 1 drifting beyond tolerance.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The background case is not covered by the requested operation.
    #[error("unsupported case: {0}")]
    UnsupportedCase(String),

    /// The truncated series cannot be trusted at the requested radius: the
    /// last retained term is too large relative to the first.
    #[error(
        "series convergence guard failed at r = {r}: last/first term ratio \
         {ratio:.3e} exceeds {threshold:.1e}"
    )]
    SeriesGuard { r: f64, ratio: f64, threshold: f64 },

    /// The adaptive integrator drove the step size below the representable
    /// floor, which signals a stiff regime this explicit method cannot cross.
    #[error("step size underflow at x = {x:.6}: h = {h:.3e} (stiff problem)")]
    Stiffness { x: f64, h: f64 },

    /// A quantity with a removable or essential singularity was evaluated at
    /// the singular configuration, e.g. the first integral Q where a' = 0.
    #[error("singular evaluation: {0}")]
    SingularEvaluation(String),

    /// The integrator exhausted its step budget before reaching the end of
    /// the requested interval.
    #[error("step budget exhausted at x = {x:.6} after {steps} accepted steps")]
    StepBudget { x: f64, steps: usize },

    /// An explicit time step larger than the diffusive stability limit.
    #[error("CFL violation: dt = {dt:.6e} exceeds the stable limit {limit:.6e}")]
    CflViolation { dt: f64, limit: f64 },

    /// Malformed input that is not a domain issue, e.g. an even truncation
    /// order or parameters outside the standing assumptions.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
