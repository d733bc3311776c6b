use thiserror::Error;

use crate::io_model::ElementAddr;

/// Everything that can go wrong inside the kernels, the simulator or the
/// file codecs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index ({i}, {j}) outside the lower triangle of a {n}x{n} matrix")]
    IndexOutOfTriangle { i: usize, j: usize, n: usize },

    #[error("matrix is not positive definite: non-positive pivot at column {column}")]
    NotPositiveDefinite { column: usize },

    #[error("zero diagonal element at column {column} of the triangular factor")]
    SingularTriangle { column: usize },

    #[error("loading {addr} would exceed the fast memory capacity of {capacity} elements")]
    CapacityExceeded { addr: ElementAddr, capacity: usize },

    #[error("evicting {addr}, which is not resident")]
    EvictNotResident { addr: ElementAddr },

    #[error("operand {addr} is not resident in fast memory")]
    NotResident { addr: ElementAddr },

    #[error("write to read-only matrix {addr}")]
    ReadOnly { addr: ElementAddr },

    #[error("fast memory of {capacity} elements is too small: {reason}")]
    MemoryTooSmall { capacity: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("search domain has {triples} operations, above the limit of {limit}")]
    DomainTooLarge { triples: usize, limit: usize },

    #[error("malformed matrix file: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
