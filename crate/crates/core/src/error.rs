use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A subsystem layout does not describe the matrix it was applied to.
    #[error("layout error: {0}")]
    Layout(String),

    /// Operand shapes do not agree.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    /// An input violated a documented precondition (Hermiticity, unitarity, positivity, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An operator that must be inverted has an eigenvalue at or below the singularity threshold.
    #[error("singular operator: eigenvalue {eigenvalue:e} is below the invertibility threshold")]
    SingularOperator { eigenvalue: f64 },

    /// The perturbation strength pushes the no-jump operator outside the positive cone.
    #[error("inadmissible perturbation: theta = {theta} gives e^theta * {max_jump:.6} > 1")]
    Admissibility { theta: f64, max_jump: f64 },

    /// A postselection or no-jump probability vanished.
    #[error("degenerate channel: postselection probability {probability:e} is too small")]
    DegenerateChannel { probability: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
