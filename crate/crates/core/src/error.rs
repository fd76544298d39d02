use thiserror::Error;

/// Errors raised anywhere in the estimation stack.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid range: lower bound {lo} must be strictly below upper bound {hi}")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("value {x} lies outside the support [{lo}, {hi}]")]
    OutOfSupport { x: f64, lo: f64, hi: f64 },

    #[error("empty sample set")]
    EmptySample,

    #[error("initial weights must be strictly positive (entry {index} is {value})")]
    BoundaryInit { index: usize, value: f64 },

    #[error("prior concentration must be positive (entry {index} is {value})")]
    InvalidPrior { index: usize, value: f64 },

    #[error("sample {index} at x = {x} has zero mixture density")]
    ZeroDensity { index: usize, x: f64 },

    #[error("vector is outside the shifted simplex: {0}")]
    OutsideDomain(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("cholesky factorization failed: {0}")]
    Cholesky(String),

    #[error("singular matrix in {context} (condition estimate {condition:.3e})")]
    Singular { context: String, condition: f64 },

    #[error("requested {requested} factors but residual covariance has rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("zero standard error for coefficient {0}")]
    ZeroStandardError(usize),

    #[error("invalid FDR level {0}; must lie in (0, 1)")]
    InvalidFdrLevel(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("date {date} precedes start date {start}")]
    DateBeforeStart { date: String, start: String },

    #[error("no observations available to form the nationwide prior for week {0}")]
    NoPrior(usize),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
