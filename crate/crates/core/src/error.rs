use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("device index {index} out of range for {n} devices")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("device {device} has non-positive or non-finite power {value}")]
    NonPositivePower { device: usize, value: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid game parameters: {0}")]
    InvalidParams(String),

    #[error("iteration {iteration} produced a non-finite power for device {device}")]
    Diverged { iteration: usize, device: usize },

    #[error("non-finite Jacobian entry at ({row}, {col})")]
    NonFiniteJacobian { row: usize, col: usize },

    #[error("update rule `{0}` is already registered")]
    DuplicateRule(String),

    #[error("unknown update rule `{0}`")]
    UnknownRule(String),

    #[error("update rule `{0}` is reserved but has no implementation; register one first")]
    ReservedRule(String),

    #[error("invalid experiment setup: {0}")]
    InvalidExperiment(String),
}

pub type Result<T> = std::result::Result<T, Error>;
