use std::path::PathBuf;

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Io,
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Validation => 1,
            ErrorClass::Io => 2,
            ErrorClass::Numerical => 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The 8-byte length prefix does not describe a header that fits in the file.
    #[error("bad header length: {0}")]
    HeaderLength(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("tensor `{first}` bytes {first_range:?} overlap tensor `{second}` bytes {second_range:?}")]
    OffsetOverlap {
        first: String,
        first_range: (usize, usize),
        second: String,
        second_range: (usize, usize),
    },

    #[error("non-finite value in tensor `{tensor}` at flat index {index}")]
    NonFinite { tensor: String, index: usize },

    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("similarity undefined: {0}")]
    UndefinedSimilarity(String),

    #[error("rate undefined: {0}")]
    UndefinedRate(String),

    #[error("reduction undefined: {0}")]
    UndefinedReduction(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable code, printed as the prefix of CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "E_IO",
            Error::HeaderLength(_) => "E_HEADER_LEN",
            Error::Format(_) => "E_FORMAT",
            Error::OffsetOverlap { .. } => "E_OFFSET_OVERLAP",
            Error::NonFinite { .. } => "E_NON_FINITE",
            Error::Pairing(_) => "E_PAIRING",
            Error::Validation(_) => "E_VALIDATION",
            Error::Parameter(_) => "E_PARAMETER",
            Error::Alignment(_) => "E_ALIGNMENT",
            Error::UndefinedSimilarity(_) => "E_UNDEFINED_SIMILARITY",
            Error::UndefinedRate(_) => "E_UNDEFINED_RATE",
            Error::UndefinedReduction(_) => "E_UNDEFINED_REDUCTION",
            Error::Numerical(_) => "E_NUMERICAL",
            Error::Json(_) => "E_JSON",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::Numerical(_)
            | Error::UndefinedSimilarity(_)
            | Error::UndefinedRate(_)
            | Error::UndefinedReduction(_) => {
                ErrorClass::Numerical
            }
            _ => ErrorClass::Validation,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
