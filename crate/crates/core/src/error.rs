use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model or distribution parameter is outside its domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("user index {index} out of range for {users} users")]
    UserOutOfRange { index: usize, users: usize },

    /// Instrumentation was queried that was not recorded or is undefined for the model.
    #[error("instrumentation unavailable: {0}")]
    Instrumentation(&'static str),

    #[error("event budget of {0} events exhausted")]
    EventBudget(u64),

    #[error("time {time} lies beyond the simulated horizon {horizon}")]
    BeyondHorizon { time: f64, horizon: f64 },

    #[error("quadrature did not reach tolerance {tolerance:e} (estimated error {estimate:e})")]
    Quadrature { tolerance: f64, estimate: f64 },

    /// Input data leaves nothing to estimate from.
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: &'static str) -> Self {
        Error::InvalidParameter { name, reason }
    }

    /// True for failures of a numerical procedure as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. } | Error::Degenerate(_) | Error::EventBudget(_)
        )
    }
}
