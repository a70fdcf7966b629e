use thiserror::Error;

/// Library-wide error type.  Variants map one-to-one onto the distinct
/// failure classes surfaced by the CLI as exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation too close to a pole of the gamma function.
    #[error("gamma pole: argument {0} is within {1:e} of a non-positive integer")]
    GammaPole(f64, f64),

    /// A structural hypothesis on the input system is violated.
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    /// The requested parameter sits on (or too close to) a resonance.
    #[error("resonance guard: 1/eps = {inv_eps} is within {guard:e} of the integer {nearest}")]
    Resonance {
        inv_eps: f64,
        nearest: i64,
        guard: f64,
    },

    /// A series or iteration failed to reach the requested tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// A truncated-series operation would need coefficients past the
    /// stored truncation order.
    #[error("truncation error: {0}")]
    Truncation(String),

    /// A bracketing precondition of a root/fold finder failed.
    #[error("bracket error: {0}")]
    Bracket(String),

    /// The ODE integrator's step size underflowed (stiff or singular).
    #[error("stiffness: step size underflow at t = {0}")]
    Stiffness(f64),

    /// A local manifold seed did not meet the residual requirement.
    #[error("seed quality: {0}")]
    SeedQuality(String),

    /// Malformed input data (system description files, grids, ...).
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
