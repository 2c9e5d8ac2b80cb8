use thiserror::Error;

/// Errors raised by lattice construction, coordinate transforms and model builders.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("capacity exceeded: ground set of size {requested} is above the limit {limit}")]
    Capacity { requested: usize, limit: usize },

    #[error("ground set mismatch: {0}")]
    GroundMismatch(String),

    #[error("empty subset")]
    EmptySubset,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not comparable: {0}")]
    NotComparable(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("parse error in {what} at line {line}, column {column}: {message}")]
    Parse {
        what: String,
        line: usize,
        column: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn parse(what: &str, line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            what: what.to_string(),
            line,
            column,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
