use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} entries, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("infeasible virtual angle [{psi_x}, {psi_y}]: {reason}")]
    InfeasibleAngle {
        psi_x: f64,
        psi_y: f64,
        reason: &'static str,
    },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("invalid tracker state: {0}")]
    InvalidState(String),

    #[error("singular gain ratio: pattern kernel vanishes at gamma = {gamma}")]
    SingularRatio { gamma: f64 },

    #[error("no pilots to estimate from")]
    EmptyPilots,

    #[error("scenario exhausted at t = {t_s} s: azimuth {azimuth} rad leaves [-pi/2, pi/2]")]
    ScenarioExhausted { t_s: f64, azimuth: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
