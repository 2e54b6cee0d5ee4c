use thiserror::Error;

use crate::relaxed::RelaxedBounds;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("life table: missing `age,lx` header (row {row})")]
    MissingHeader { row: usize },

    #[error("life table: row {row} is malformed: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("life table: age {age} at row {row} does not follow age {previous}")]
    NonConsecutiveAges { row: usize, age: i64, previous: i64 },

    #[error("life table: non-positive count {count} at row {row}")]
    NonPositiveCount { row: usize, count: f64 },

    #[error("life table: count {count} at row {row} exceeds the previous count {previous}")]
    IncreasingCount { row: usize, count: f64, previous: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ages {from}..={to} are not covered by the table (ages {base}..={last})")]
    AgeOutOfRange { from: i64, to: i64, base: i64, last: i64 },

    #[error("time {t} exceeds the {horizon}-year horizon of the survival data")]
    HorizonExceeded { t: f64, horizon: usize },

    #[error("fund value must be positive, got {0}")]
    NonPositiveFund(f64),

    #[error("maturity {0} is not an integer number of years")]
    NonIntegerMaturity(f64),

    #[error("policy iteration did not converge at t = {t} after {iterations} sweeps")]
    GridTooCoarse { t: f64, iterations: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("inconsistent simulation grid: {0}")]
    InconsistentGrid(String),

    #[error("dual optimisation stopped after {iterations} iterations with subgradient norm {grad_norm:.3e}")]
    DualNotConverged {
        iterations: usize,
        grad_norm: f64,
        best: Box<RelaxedBounds>,
    },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
