use thiserror::Error;

/// Errors raised by the simulator core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("index out of window: {0}")]
    OutOfWindow(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The sensing window does not yet hold enough history.
    #[error("insufficient history: need {needed} slots, have {available}")]
    InsufficientHistory { needed: u64, available: u64 },

    #[error("no candidate resources in selection window")]
    NoCandidates,

    #[error("invalid config `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("trace parse error at line {line}: {reason}")]
    TraceParse { line: usize, reason: String },

    #[error("trace schema error: {0}")]
    TraceSchema(String),

    #[error("end of scenario at t = {0} s")]
    EndOfScenario(f64),

    #[error(transparent)]
    Io(#[from] IoError),
}

/// `std::io::Error` is not `Clone`; keep its message only.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("io: {0}")]
pub struct IoError(pub String);

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(IoError(e.to_string()))
    }
}

impl SimError {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        SimError::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
