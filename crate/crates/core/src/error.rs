use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("point is outside the closed Weyl chamber: {0}")]
    OutsideChamber(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("missing parameter `{0}`")]
    MissingParameter(String),

    #[error("empty range")]
    EmptyRange,

    #[error("Plancherel calibration residual {residual:.3e} exceeds {limit:.1e}")]
    Calibration { residual: f64, limit: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("inadmissible parameters: {}", .0.join("; "))]
    Inadmissible(Vec<String>),

    #[error("fixed-point iteration did not converge at step {step} (t = {time}, increment {increment:.3e})")]
    NoContraction {
        step: usize,
        time: f64,
        increment: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("fit window [{lo}, {hi}] lies outside the sampled range")]
    FitWindow { lo: f64, hi: f64 },

    #[error("function vanishes identically")]
    ZeroFunction,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}
