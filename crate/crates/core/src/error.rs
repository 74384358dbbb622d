//! Crate-wide error type.

use crate::date::MonthDate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),

    #[error("invalid ordering: {0}")]
    InvalidOrdering(String),

    #[error("invalid date `{0}`, expected YYYY-MM")]
    ParseDate(String),

    #[error("non-contiguous months: expected {expected}, found {found}")]
    NonContiguousDates { expected: MonthDate, found: MonthDate },

    #[error("row {row}: cannot parse `{value}` in column `{column}`")]
    ParseCell { row: usize, column: String, value: String },

    #[error("missing value for `{column}` at {date} inside the data window")]
    InteriorGap { column: String, date: MonthDate },

    #[error("empty window")]
    EmptyWindow,

    #[error("{date} outside panel range {start}..{end}")]
    OutOfRange {
        date: MonthDate,
        start: MonthDate,
        end: MonthDate,
    },

    #[error("matrix not positive definite (smallest eigenvalue {min_eig:.3e})")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("rank-deficient regression design")]
    RankDeficient,

    #[error("non-finite innovation variance at step {0}; the state-space spec is degenerate")]
    DegenerateFilter(usize),

    #[error("optimizer did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("{0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
