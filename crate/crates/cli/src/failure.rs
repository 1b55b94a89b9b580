use std::fmt;

use turlab_core::Error;

/// Exit-code class of a failed command.
#[derive(Debug)]
pub enum Failure {
    /// A checked invariant did not hold (exit 2).
    Invariant(String),
    /// Bad flags, unreadable or malformed input, unwritable output (exit 3).
    Input(String),
    /// Singular or vanishing quantities (exit 4).
    Degenerate(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Invariant(_) => 2,
            Failure::Input(_) => 3,
            Failure::Degenerate(_) => 4,
        }
    }

    pub fn io(context: impl fmt::Display, e: std::io::Error) -> Self {
        Failure::Input(format!("{context}: {e}"))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invariant(m) => write!(f, "invariant failure: {m}"),
            Failure::Input(m) => write!(f, "{m}"),
            Failure::Degenerate(m) => write!(f, "numerical degeneracy: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SingularOperator { .. }
            | Error::DegenerateChannel { .. }
            | Error::Admissibility { .. } => Failure::Degenerate(e.to_string()),
            Error::Layout(_) | Error::DimensionMismatch { .. } | Error::Contract(_) => {
                Failure::Input(e.to_string())
            }
        }
    }
}
