use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown builtin modulus `{0}`")]
    UnknownBuiltin(String),

    #[error("modulus `{name}` vanishes at probe n = {n}; the ratio f(n*eps)/f(n) is undefined")]
    EstimatorFailure { name: String, n: f64 },

    #[error("lacunary schedule exhausted: requested block {requested}, horizon is {available}")]
    ScheduleExhausted { requested: usize, available: usize },

    #[error("dimension mismatch: point has dimension {point}, set has dimension {set}")]
    DimensionMismatch { point: usize, set: usize },

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("distance oracle returned {0}, expected a finite nonnegative value")]
    BadOracle(f64),

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: u64, len: u64 },

    #[error("mode {mode} requires {what}")]
    MissingParameter { mode: &'static str, what: &'static str },

    #[error("construction failed at step k = {k}: {reason}")]
    Construction { k: usize, reason: String },

    #[error("trace too long to materialize densely ({0} entries)")]
    TraceTooLong(u64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
