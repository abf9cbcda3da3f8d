use thiserror::Error;

/// Errors produced by the codec library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: usize, limit: usize },

    #[error("pnm: {0}")]
    Pnm(String),

    #[error("jpeg decode error at byte {offset}: {kind}")]
    Jpeg { offset: usize, kind: JpegErrorKind },

    #[error("arithmetic decoder: input truncated after {consumed} bytes")]
    ArithTruncated { consumed: usize },

    #[error("container field `{field}`: {reason}")]
    Container { field: &'static str, reason: String },

    #[error("target ratio {target:.2}:1 unattainable; closest achievable is {closest:.2}:1")]
    Unattainable { target: f64, closest: f64 },

    #[error("io: {0}")]
    Io(String),
}

/// What went wrong while parsing a JPEG stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JpegErrorKind {
    Truncated,
    BadMarker(u8),
    MissingSoi,
    Unsupported(String),
    BadTable(String),
    HuffmanOverrun,
    BadFrame(String),
}

impl std::fmt::Display for JpegErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            JpegErrorKind::Truncated => write!(f, "truncated stream"),
            JpegErrorKind::BadMarker(m) => write!(f, "bad marker 0x{m:02X}"),
            JpegErrorKind::MissingSoi => write!(f, "missing SOI"),
            JpegErrorKind::Unsupported(s) => write!(f, "unsupported: {s}"),
            JpegErrorKind::BadTable(s) => write!(f, "bad table: {s}"),
            JpegErrorKind::HuffmanOverrun => write!(f, "huffman code overrun"),
            JpegErrorKind::BadFrame(s) => write!(f, "bad frame: {s}"),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
