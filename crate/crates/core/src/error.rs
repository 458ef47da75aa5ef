use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid metric specification: {0}")]
    InvalidSpec(String),
    #[error("{name} is not positive at t={t} (value {value})")]
    NonPositive { name: String, t: f64, value: f64 },
    #[error("gamma is not increasing near t={t}")]
    NonMonotoneGamma { t: f64 },
    #[error("gamma^-1({u}) could not be located inside the interval")]
    InverseOutOfRange { u: f64 },
    #[error("t={t} lies outside the interval {interval}")]
    OutsideInterval { t: f64, interval: String },
    #[error("quadrature failed to converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },
    #[error("step synthesis did not converge on gap {gap} after {doublings} doublings")]
    StepSynthesis { gap: i64, doublings: u32 },
    #[error("negative integrand for {which} at t={t} (value {value})")]
    NegativeIntegrand {
        which: &'static str,
        t: f64,
        value: f64,
    },
    #[error("radius radicand is not positive at t={t} (value {value})")]
    Radicand { t: f64, value: f64 },
    #[error("collision witness requires {0}")]
    WitnessPrecondition(String),
}
