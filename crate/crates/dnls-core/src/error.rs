use thiserror::Error;

/// Errors surfaced by solvers and probes. Numerical failures carry the
/// measured quantity that tripped them so callers can report or retry.
#[derive(Debug, Clone, Error)]
pub enum CoreError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grids disagree: {0}")]
    GridMismatch(String),

    #[error("boundary/initial compatibility violated: |g(0) - h(0)| = {mismatch:.3e} > {tol:.3e}")]
    CompatibilityViolation { mismatch: f64, tol: f64 },

    #[error("solution blew up at t = {time}: max |u| = {max_abs:.3e}")]
    BlowupDetected { time: f64, max_abs: f64 },

    #[error("no contraction: Picard factors exceeded 1 for three consecutive iterates (iterate {iterate}); reduce T")]
    NoContraction { iterate: usize },

    #[error("outer boundary-phase iteration did not converge within {iterations} iterations")]
    OuterNoContraction { iterations: usize },

    #[error("input carries spectral content beyond the admissible band: |u_hat({xi:.3})| = {amplitude:.3e}")]
    BandlimitViolation { xi: f64, amplitude: f64 },

    #[error("fields are too close to probe a Lipschitz ratio (distance {distance:.3e})")]
    DivisionGuard { distance: f64 },

    #[error("only {usable} dyadic levels carry energy above the floor; at least {needed} are required")]
    InsufficientRange { usable: usize, needed: usize },

    #[error("parameters outside the validity window of estimate {estimate}: {reason}")]
    WindowViolation { estimate: String, reason: String },
}

pub type Result<T> = std::result::Result<T, CoreError>;
