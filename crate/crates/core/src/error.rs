use thiserror::Error;

pub type Result<T> = std::result::Result<T, EvtError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvtError {
    /// An argument lies outside the domain of a formula.
    #[error("{what}: argument {value} outside the domain")]
    Domain { what: &'static str, value: f64 },

    /// Malformed or out-of-range user input.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("order statistic index {index} out of range for sample of size {n}")]
    Index { index: usize, n: usize },

    /// The data make a denominator vanish or a fit meaningless.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The estimator needs a negative (or non-positive) index estimate and did not get one.
    #[error("{method} unavailable: estimated extreme value index {gamma_hat} has the wrong sign")]
    Unavailable { method: &'static str, gamma_hat: f64 },

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("inconsistent nested fits: deviance {0} is negative")]
    InconsistentFit(f64),

    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

impl EvtError {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            EvtError::Domain { .. }
            | EvtError::Input(_)
            | EvtError::Index { .. }
            | EvtError::Unsupported(_) => 2,
            EvtError::Degenerate(_)
            | EvtError::Unavailable { .. }
            | EvtError::Optimization(_)
            | EvtError::InconsistentFit(_) => 3,
        }
    }
}
