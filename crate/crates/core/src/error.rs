use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty p-value vector")]
    Empty,

    #[error("p-value at position {index} is {value}, expected a number in [0, 1]")]
    InvalidPValue { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("method {method} requires {what}")]
    MissingInput { method: String, what: &'static str },

    #[error("{0}")]
    Mismatch(String),

    #[error("table of {b} replicates is too small for alpha = {alpha} (need B*alpha >= {min_tail})")]
    UnstableTail { b: usize, alpha: f64, min_tail: usize },

    #[error("requested {requested} Monte Carlo cells exceeds the budget of {budget}")]
    Budget { requested: u128, budget: u128 },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by exceeding a configured resource limit.
    pub fn is_resource_guard(&self) -> bool {
        matches!(self, Error::Budget { .. })
    }
}
