use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Why a Matrix Market body was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("malformed header: {0}")]
    Header(String),
    #[error("non-numeric token `{0}`")]
    NotANumber(String),
    #[error("index ({row}, {col}) outside declared {rows}x{cols}")]
    IndexOutOfBounds { row: u64, col: u64, rows: u64, cols: u64 },
    #[error("declared {declared} entries, found {found}")]
    CountMismatch { declared: u64, found: u64 },
    #[error("unsupported field or symmetry `{0}`")]
    Unsupported(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape {rows}x{cols}")]
    InvalidShape { rows: usize, cols: usize },
    #[error("{op}: dimension mismatch {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("entry ({row}, {col}) outside block rows {rows:?} cols {cols:?}")]
    IndexOutOfRange {
        row: u64,
        col: u64,
        rows: std::ops::Range<usize>,
        cols: std::ops::Range<usize>,
    },
    #[error("{rows}x{cols} does not fit 32-bit indices")]
    IndexWidthOverflow { rows: usize, cols: usize },
    #[error("sparse entries not strictly sorted by (row, col) at position {0}")]
    Unsorted(usize),
    #[error("parallel arrays differ in length: {0}")]
    LengthMismatch(String),
    #[error("block {} is absent", .path.display())]
    BlockAbsent { path: PathBuf },
    #[error("block {} is corrupt: {reason}", .path.display())]
    BlockCorrupt { path: PathBuf, reason: String },
    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {kind}")]
    Parse { line: usize, kind: ParseErrorKind },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("SVD did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
    #[error("memory budget infeasible: {0}")]
    BudgetInfeasible(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no execution plan found in {}", .0.display())]
    NoPlan(PathBuf),
    #[error("plan in workdir was built for a different configuration (stored digest {stored}, requested {requested})")]
    ConfigMismatch { stored: String, requested: String },
    #[error("interrupted at write boundary {0}")]
    Interrupted(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
