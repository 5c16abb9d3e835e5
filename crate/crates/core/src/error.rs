use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("rejected input: {0}")]
    RejectedInput(String),

    #[error("unknown system `{0}` (expected one of quintic1d, vanderpol, brusselator, lorenz)")]
    UnknownSystem(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step budget of {max_steps} steps exhausted at t = {t}")]
    StepBudget { max_steps: usize, t: f64 },

    #[error("step size {h:e} fell below h_min = {h_min:e} at t = {t}")]
    StepUnderflow { h: f64, h_min: f64, t: f64 },

    #[error("solution diverged; last finite state at t = {last_good_t}")]
    Divergence { last_good_t: f64 },

    #[error("time {t} lies outside the trajectory span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian at Newton iterate {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("no sign change of the scanned quantity on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

impl Error {
    /// Short machine-readable tag, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::RejectedInput(_) => "rejected_input",
            Error::UnknownSystem(_) => "unknown_system",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::StepBudget { .. } => "step_budget",
            Error::StepUnderflow { .. } => "step_underflow",
            Error::Divergence { .. } => "divergence",
            Error::OutOfRange { .. } => "out_of_range",
            Error::NoConvergence { .. } => "no_convergence",
            Error::SingularJacobian { .. } => "singular_jacobian",
            Error::NoBracket { .. } => "no_bracket",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::Consistency(_) => "consistency",
        }
    }

    /// True for errors caused by bad user input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::RejectedInput(_) | Error::UnknownSystem(_) | Error::InvalidParameter(_)
        )
    }
}
