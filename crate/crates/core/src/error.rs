use thiserror::Error;

/// Errors raised by the simulation, contact and planning layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("unknown gait preset `{0}`")]
    UnknownGait(String),

    #[error("non-finite entry in state coordinate {coordinate}")]
    NonFiniteState { coordinate: usize },

    #[error("non-finite acceleration at generalized coordinate {coordinate}")]
    NonFiniteAcceleration { coordinate: usize },

    #[error("joint J{joint} torque {torque:.4} N·m exceeds limit {limit} N·m")]
    TorqueLimit { joint: usize, torque: f64, limit: f64 },

    #[error("mass matrix is not positive definite")]
    SingularMassMatrix,

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("sliding speed must be non-negative, got {0}")]
    NegativeSpeed(f64),

    #[error("time {t} s is outside the timeline [0, {duration}] s")]
    TimeOutOfRange { t: f64, duration: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("planner failed: {0}")]
    Planner(String),
}

pub type Result<T> = std::result::Result<T, Error>;
