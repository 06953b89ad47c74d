use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Invalid parameters, inconsistent dimensions, malformed configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: String,
        got: String,
    },

    /// A state component became non-finite or exceeded the divergence threshold.
    #[error("simulation diverged at t = {time}")]
    Diverged { time: f64 },

    /// Condition `2 gamma L int_0^T exp(2qs) ds < 1` does not hold.
    #[error("MASP condition failed: 2*gamma*L*int_0^T exp(2qs) ds = {lhs} (must be < 1)")]
    MaspConditionFailed { lhs: f64 },

    #[error("MASP exceeded: T = {t} is not below T_max = {t_max}")]
    MaspExceeded { t: f64, t_max: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn dim(what: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            what,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
