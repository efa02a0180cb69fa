use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "quadrature did not converge: best estimate {estimate}, achieved tolerance {achieved}, requested {requested}"
    )]
    QuadratureDepth {
        estimate: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("invalid record {id}: {reason}")]
    InvalidRecord { id: String, reason: String },

    #[error("subject {id}: every latent trajectory case is infeasible")]
    NoFeasibleCase { id: String },

    #[error("subject {id}: all case probabilities are zero (model incompatible with record)")]
    ZeroProbability { id: String },

    #[error("non-finite log-likelihood at subject {id}")]
    NonFiniteLikelihood { id: String },

    #[error("sampler aborted at sweep {sweep}, block {block}: {reason}")]
    SamplerAbort {
        sweep: usize,
        block: String,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate chain: {0}")]
    DegenerateChain(String),

    #[error("csv parse error at row {row}: {reason}")]
    CsvRow { row: usize, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
