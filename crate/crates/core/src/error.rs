use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("join graph is disconnected: {unreachable} not reachable from {root}")]
    Disconnected { root: String, unreachable: String },

    #[error("self-loop join on table {table}")]
    SelfLoop { table: String },

    #[error("unknown table {name} referenced by a join")]
    UnknownTable { name: String },

    #[error("duplicate table name {name}")]
    DuplicateTable { name: String },

    #[error("table {name} has invalid cardinality {value}")]
    InvalidCardinality { name: String, value: String },

    #[error("graph has {tables} tables; at most {max} are supported")]
    TooManyTables { tables: usize, max: usize },

    #[error("missing cardinality for subset {subset}")]
    MissingCardinality { subset: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("exhaustive enumeration limited to {limit} tables, graph has {tables}")]
    SubsetLimit { tables: usize, limit: usize },

    #[error("arrangement bound {bound} exceeds limit {limit}")]
    ArrangementLimit { bound: u128, limit: u128 },

    #[error("optimization timed out")]
    Timeout,

    #[error("csv error: {0}")]
    Csv(String),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Malformed(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Csv(err.to_string())
    }
}
