use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("semiring {op} overflowed")]
    Overflow { op: &'static str },

    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("{what} index {index} out of range 1..={bound}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("duplicate sparse entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },

    #[error("sparse entry at ({row}, {col}) stores the semiring zero")]
    ZeroEntry { row: usize, col: usize },

    #[error("nnz {nnz} exceeds budget ceil(n^tau) = {budget}")]
    BudgetExceeded { nnz: usize, budget: usize },

    #[error("materialization of {rows} rows exceeds cap {cap}")]
    CapExceeded { rows: usize, cap: usize },

    #[error("{op} called in phase {phase}")]
    WrongPhase { op: &'static str, phase: &'static str },

    #[error("{0} needs at least one term")]
    EmptyTerms(&'static str),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot fit exponent: {0}")]
    Fit(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn dims(op: &'static str, detail: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            op,
            detail: detail.into(),
        }
    }
}
