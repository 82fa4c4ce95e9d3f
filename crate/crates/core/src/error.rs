use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("value {0} is outside the open interval (0, 1)")]
    Domain(f64),

    #[error("non-finite value {0}")]
    NonFinite(f64),

    #[error("factor ({a}, {b}) is a self-loop")]
    SelfLoop { a: usize, b: usize },

    #[error("duplicate factor between variables {a} and {b}")]
    DuplicateFactor { a: usize, b: usize },

    #[error("variable index {index} out of range for {num_vars} variables")]
    IndexOutOfRange { index: usize, num_vars: usize },

    #[error("factor table entry {value} is negative")]
    NegativeWeight { value: f64 },

    #[error("factor table has no positive entry")]
    ZeroTable,

    #[error("graph is disconnected")]
    Disconnected,

    #[error("graph is not a tree")]
    NotATree,

    #[error("exact enumeration refused: {num_vars} variables exceeds the limit of {limit}")]
    TooLarge { num_vars: usize, limit: usize },

    #[error("partition function is zero; no assignment has positive weight")]
    ZeroPartition,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("gate arity {arity} exceeds the limit of {limit}")]
    ArityTooLarge { arity: usize, limit: usize },

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("dimension {index} out of range for width {width}")]
    DimOutOfRange { index: usize, width: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no pair of tokens shares a routing key")]
    NoSharedKey,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {source}")]
    AtLine { line: usize, source: Box<Error> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
