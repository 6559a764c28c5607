use thiserror::Error;

/// Errors raised by the block-spin algebra.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A matrix that an identity requires to be invertible is numerically singular.
    /// `assumption` names the invertibility hypothesis that failed.
    #[error("NearSingular: {assumption} (condition number {cond:.3e} exceeds limit {limit:.1e})")]
    NearSingular {
        assumption: String,
        cond: f64,
        limit: f64,
    },

    #[error("space mismatch: expected {expected}, found {found}")]
    SpaceMismatch { expected: String, found: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid bilinear form: {0}")]
    InvalidForm(String),

    #[error("step {step}: extent {extent} on axis {axis} is not divisible by block side {block}")]
    Divisibility {
        step: usize,
        axis: usize,
        extent: usize,
        block: usize,
    },

    #[error("invalid averaging profile: {0}")]
    Profile(String),

    #[error("invalid polynomial: {0}")]
    Polynomial(String),

    #[error("{solver} did not converge in {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(
        "quadrature self-consistency failed: {coarse:.12e} vs {fine:.12e} (allowed {allowed:.1e})"
    )]
    Quadrature {
        coarse: f64,
        fine: f64,
        allowed: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
