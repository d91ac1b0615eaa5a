use thiserror::Error;

/// Errors raised by the simulator and compiler.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QppError {
    /// Input violated a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// Mesh settings do not match the topology for their mode count.
    #[error("structural error: {0}")]
    Structure(String),

    #[error("matrix is not unitary: max |UU^H - I| = {violation:.3e} exceeds {tolerance:.1e}")]
    NotUnitary { violation: f64, tolerance: f64 },

    #[error("unknown heater id {0}")]
    UnknownHeater(usize),

    /// Calibration data cannot determine the phase response.
    #[error("fit degeneracy: {0}")]
    FitDegenerate(String),

    /// No 2π branch keeps every heater power inside its drive range.
    #[error("infeasible voltage solve for heaters {heaters:?}")]
    Infeasible { heaters: Vec<usize> },

    #[error("baseline undefined: {0}")]
    BaselineUndefined(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// Some items of a campaign failed; one line per failed item.
    #[error("campaign failed: {}", .0.join("; "))]
    Campaign(Vec<String>),
}

impl QppError {
    /// Errors caused by bad user input rather than by the experiment.
    pub fn is_usage(&self) -> bool {
        matches!(self, QppError::Validation(_) | QppError::Parse(_))
    }
}

impl From<std::io::Error> for QppError {
    fn from(err: std::io::Error) -> Self {
        QppError::Io(err.to_string())
    }
}

impl From<serde_json::Error> for QppError {
    fn from(err: serde_json::Error) -> Self {
        QppError::Parse(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QppError>;

pub(crate) fn validation<T>(msg: impl Into<String>) -> Result<T> {
    Err(QppError::Validation(msg.into()))
}
