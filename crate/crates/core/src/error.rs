use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("pole at x = {x}")]
    Pole { x: f64 },

    #[error("orbit hit the pole at 0 on step {step}")]
    PoleEncountered { step: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("level {n} exceeds the configured cap {cap}")]
    CapExceeded { n: usize, cap: usize },

    #[error("no sign change in ({a}, {b}) on shell {p}")]
    BracketFailure { p: usize, a: f64, b: f64 },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("shell {p}: found {found} zeros, expected {expected}")]
    CountMismatch {
        p: usize,
        found: usize,
        expected: usize,
    },

    #[error("x = {x} is within {dist:e} of a pole (intermediate value {value:e})")]
    NearPole { x: f64, dist: f64, value: f64 },

    #[error("propagated error {err:e} exceeds {limit:e}")]
    PrecisionLoss { err: f64, limit: f64 },

    #[error("{what} = {value} exceeds the precision cap {cap}")]
    PrecisionCap {
        what: &'static str,
        value: usize,
        cap: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
