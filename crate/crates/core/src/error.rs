use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the estimators and the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("timestamp out of representable range")]
    TimestampOverflow,

    #[error("cannot parse timestamp {0:?}")]
    TimestampParse(String),

    #[error(transparent)]
    Ingest(#[from] IngestError),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

/// Errors raised while loading, fetching or interpreting chain data.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty snapshot")]
    Empty,

    #[error("height gap: expected {expected} after {previous}, found {found}")]
    Gap {
        previous: u64,
        expected: u64,
        found: u64,
    },

    #[error("block {height}: difficulty must be positive and finite, got {difficulty}")]
    BadDifficulty { height: u64, difficulty: f64 },

    #[error("block {height}: timestamp {time} out of range")]
    BadTimestamp { height: u64, time: i64 },

    #[error("connection failed: {0}")]
    Connection(String),

    #[error("http status {0}")]
    HttpStatus(u16),

    #[error("malformed response: {0}")]
    Schema(String),

    #[error("need at least {needed} blocks, snapshot has {have}")]
    TooFewBlocks { needed: usize, have: usize },

    #[error("non-positive elapsed time between blocks {first} and {last} ({seconds} s)")]
    ClockSkew { first: u64, last: u64, seconds: i64 },

    #[error("tip height {tip} is not below the halving height {halving}")]
    PastHalving { tip: u64, halving: u64 },
}
