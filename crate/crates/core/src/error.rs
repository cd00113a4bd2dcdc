use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid attribute space: {0}")]
    InvalidSpace(String),

    #[error("input space of {size} points exceeds the enumeration limit of {limit}")]
    SpaceTooLarge { size: u128, limit: u64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("value {value} out of range for attribute {attr} (cardinality {cardinality})")]
    ValueOutOfRange {
        attr: usize,
        value: u32,
        cardinality: u32,
    },

    #[error("leaf label {0} is not binary")]
    NonBinaryLabel(f64),

    #[error("energy threshold {0} outside (0, 1]")]
    InvalidEnergyThreshold(f64),

    #[error("attribute {0} is already part of the spectrum's attribute set")]
    AttributeOverlap(usize),

    #[error("spectra do not share an attribute set")]
    AttributeSetMismatch,

    #[error("spectra are defined over different attribute spaces")]
    SpaceMismatch,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("stream is empty")]
    EmptyStream,

    #[error("{0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}
