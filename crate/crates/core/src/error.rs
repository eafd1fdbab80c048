use alloc::string::String;
use core::fmt;

/// Errors raised by the in-memory core.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// The vector's L2 norm is below the normalization floor.
    ZeroVector,
    /// A component was NaN or infinite.
    NonFinite,
    DimensionMismatch { expected: usize, actual: usize },
    DuplicateId(String),
    /// The index file failed magic, version, checksum or structural checks.
    CorruptFile(String),
    InvalidConfig(String),
    InvalidRecord(String),
    InvalidQuery(String),
    EmptyLabelSet,
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::ZeroVector => f.write_str("vector has zero norm"),
            CoreError::NonFinite => f.write_str("vector contains a non-finite component"),
            CoreError::DimensionMismatch { expected, actual } => {
                write!(f, "dimension mismatch: expected {expected}, got {actual}")
            }
            CoreError::DuplicateId(id) => write!(f, "duplicate id `{id}`"),
            CoreError::CorruptFile(why) => write!(f, "corrupt index file: {why}"),
            CoreError::InvalidConfig(why) => write!(f, "invalid configuration: {why}"),
            CoreError::InvalidRecord(why) => write!(f, "invalid record: {why}"),
            CoreError::InvalidQuery(why) => write!(f, "invalid query: {why}"),
            CoreError::EmptyLabelSet => f.write_str("label set is empty"),
        }
    }
}

impl core::error::Error for CoreError {}
