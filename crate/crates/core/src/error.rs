use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("the root address has no centre; its cube is the whole torus")]
    EmptyAddress,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid sign {0}; components must be -1 or +1")]
    InvalidSign(i8),

    #[error("malformed address string {input:?}: {reason}")]
    MalformedAddress { input: String, reason: String },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time {t} outside [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("point lies outside the start cube; the closed-form path does not apply")]
    OutsideStartCube,

    #[error("step size underflow at t = {t} (h = {h:e}); last good state {state:?}")]
    StepUnderflow { t: f64, h: f64, state: Vec<f64> },

    #[error("integration interval must satisfy t0 < t1 (got {t0} >= {t1})")]
    EmptyInterval { t0: f64, t1: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
