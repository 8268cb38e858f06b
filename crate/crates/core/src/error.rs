use thiserror::Error;

/// Errors raised by the estimation and beamforming pipeline.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid mode index {0}, expected 1, 2 or 3")]
    InvalidMode(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rank {rank} is infeasible for this tensor (limit {limit})")]
    InfeasibleRank { rank: usize, limit: usize },

    #[error("ill-conditioned problem: {0}")]
    Conditioning(String),

    #[error("zero column supplied to estimator (component {0})")]
    ZeroColumn(usize),

    #[error("degenerate component {0}: ambiguity scaling is numerically zero")]
    DegenerateComponent(usize),

    #[error("no feasible selection of {requested} paths; largest feasible set has {largest}")]
    InfeasibleSelection { requested: usize, largest: usize },

    #[error("request exceeds memory cap: {0}")]
    MemoryCap(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
