use std::path::PathBuf;

/// Errors produced by the fingerprinting pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),

    #[error("truncated data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },

    #[error("unsupported PGM maxval {0} (expected 2^b - 1 for b in 8..=16)")]
    UnsupportedMaxval(u32),

    #[error("malformed metadata at line {line}: {message}")]
    MalformedMeta { line: usize, message: String },

    #[error("bad magic {0:?}, expected \"DSNF\"")]
    BadMagic([u8; 4]),

    #[error("unsupported pattern format version {0}")]
    VersionMismatch(u16),

    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },

    #[error("empty input set")]
    EmptySet,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("all observations are non-positive; cannot fit an exponential")]
    AllNonPositive,

    #[error("correlation series has no rising segment")]
    MonotoneDecreasing,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(left: (usize, usize), right: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            left: format!("{}x{}", left.0, left.1),
            right: format!("{}x{}", right.0, right.1),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
