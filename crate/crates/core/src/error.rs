use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("value is not finite: {0}")]
    NonFinite(f64),

    #[error("unknown format name `{0}`")]
    UnknownFormat(String),

    #[error("invalid format: {0}")]
    InvalidFormat(String),

    #[error("int8 has no subnormals")]
    NoSubnormals,

    #[error("code {code:#04x} is a reserved non-value in {format}")]
    NonValueCode { code: u8, format: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("scale group splits the contracting axis {axis}")]
    ScaleSplitsContraction { axis: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid distribution spec: {0}")]
    InvalidDistribution(String),

    #[error("tensor file: {0}")]
    TensorFile(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-parseable code, one per error class.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonFinite(_) => "NON_FINITE",
            Error::UnknownFormat(_) => "UNKNOWN_FORMAT",
            Error::InvalidFormat(_) => "INVALID_FORMAT",
            Error::NoSubnormals => "NO_SUBNORMALS",
            Error::NonValueCode { .. } => "NON_VALUE_CODE",
            Error::ShapeMismatch(_) => "SHAPE_MISMATCH",
            Error::ScaleSplitsContraction { .. } => "SCALE_SPLITS_CONTRACTION",
            Error::Domain(_) => "DOMAIN",
            Error::InvalidDistribution(_) => "INVALID_DISTRIBUTION",
            Error::TensorFile(_) => "TENSOR_FILE",
            Error::InsufficientData(_) => "INSUFFICIENT_DATA",
            Error::Io(_) => "IO",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
