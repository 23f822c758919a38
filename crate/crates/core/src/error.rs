use alloc::boxed::Box;
use core::fmt;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A stored value is NaN or infinite.
    NonFiniteValue {
        index: usize,
    },
    /// A stored value is exactly zero; zeros must be implicit.
    StoredZero {
        index: usize,
    },
    /// Index not strictly greater than its predecessor.
    UnsortedIndex {
        index: usize,
    },
    IndexOutOfRange {
        index: usize,
        dim: usize,
    },
    /// Dimension must be positive.
    ZeroDimension,
    DimensionMismatch {
        left: usize,
        right: usize,
    },
    /// Both min-max sums (or a cosine norm) are zero.
    UndefinedSimilarity,
    InvalidParameter(&'static str),
    /// GCWS needs at least one positive coordinate.
    EmptyVector,
    /// Signatures were produced under different hash configurations.
    ConfigMismatch,
    SampleCountMismatch {
        expected: usize,
        found: usize,
    },
    /// Training needs at least two distinct labels.
    SingleClass,
    LengthMismatch {
        rows: usize,
        labels: usize,
    },
    /// A Gram entry failed; carries the pair that failed.
    GramEntry {
        row: usize,
        col: usize,
        source: Box<Error>,
    },
    /// An operation on one row of a batch failed.
    Row {
        index: usize,
        source: Box<Error>,
    },
    /// A computed Gram matrix broke its range or diagonal invariant.
    GramInvariant {
        row: usize,
        col: usize,
        value: f64,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFiniteValue { index } => write!(f, "non-finite value at index {index}"),
            Error::StoredZero { index } => write!(f, "explicit zero stored at index {index}"),
            Error::UnsortedIndex { index } => {
                write!(f, "indices must be strictly increasing (at {index})")
            }
            Error::IndexOutOfRange { index, dim } => {
                write!(f, "index {index} out of range for dimension {dim}")
            }
            Error::ZeroDimension => f.write_str("dimension must be positive"),
            Error::DimensionMismatch { left, right } => {
                write!(f, "dimension mismatch: {left} vs {right}")
            }
            Error::UndefinedSimilarity => f.write_str("similarity undefined for zero vectors"),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::EmptyVector => f.write_str("cannot hash an empty vector"),
            Error::ConfigMismatch => f.write_str("signatures come from different hash configs"),
            Error::SampleCountMismatch { expected, found } => {
                write!(f, "expected {expected} samples, found {found}")
            }
            Error::SingleClass => f.write_str("training data must contain at least two classes"),
            Error::LengthMismatch { rows, labels } => {
                write!(f, "{rows} rows but {labels} labels")
            }
            Error::GramEntry { row, col, source } => {
                write!(f, "kernel({row}, {col}): {source}")
            }
            Error::Row { index, source } => write!(f, "row {index}: {source}"),
            Error::GramInvariant { row, col, value } => {
                write!(
                    f,
                    "gram entry ({row}, {col}) = {value} violates kernel range"
                )
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T, E = Error> = core::result::Result<T, E>;
