use thiserror::Error;

use crate::dynamics::State;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid mass {value} for body {index}: masses must be positive and finite")]
    InvalidMass { index: usize, value: f64 },

    #[error("bodies {0} and {1} coincide")]
    Collision(usize, usize),

    #[error("configuration rank too low for a unique rotation correction (need rank >= {needed})")]
    RankDeficient { needed: usize },

    #[error("pair potential violates the attractive-potential hypotheses: {0}")]
    PotentialHypothesis(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration is not degenerate (|S| = {s:e} relative to scale {scale:e})")]
    NotDegenerate { s: f64, scale: f64 },

    #[error("configuration is not planar (|S| = {s:e})")]
    NotPlanar { s: f64 },

    #[error("time {t} outside trajectory span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("step size underflow at t = {}", .last.t)]
    StepUnderflow { last: Box<State> },

    #[error("integrator failure: {0}")]
    Integrator(String),

    #[error("unknown scenario {name:?}; valid scenarios: {}", .valid.join(", "))]
    UnknownScenario { name: String, valid: Vec<String> },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
