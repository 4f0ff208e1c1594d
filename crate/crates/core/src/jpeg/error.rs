use std::fmt;

/// Stream features outside the supported baseline subset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Unsupported {
    Progressive,
    ArithmeticCoding,
    Lossless,
    ExtendedSequential,
    Hierarchical,
    DefineNumberOfLines,
    Precision(u8),
    ComponentCount(u8),
    /// Sampling factors per component, in frame order.
    Sampling(Vec<(u8, u8)>),
    Marker(u8),
}

impl fmt::Display for Unsupported {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unsupported::Progressive => f.write_str("progressive"),
            Unsupported::ArithmeticCoding => f.write_str("arithmetic coding"),
            Unsupported::Lossless => f.write_str("lossless"),
            Unsupported::ExtendedSequential => f.write_str("extended sequential (SOF1)"),
            Unsupported::Hierarchical => f.write_str("hierarchical"),
            Unsupported::DefineNumberOfLines => f.write_str("DNL marker"),
            Unsupported::Precision(p) => write!(f, "{p}-bit sample precision"),
            Unsupported::ComponentCount(n) => write!(f, "{n} components"),
            Unsupported::Sampling(s) => write!(f, "sampling factors {s:?}"),
            Unsupported::Marker(m) => write!(f, "marker 0xFF{m:02X}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableKind {
    Quantization,
    HuffmanDc,
    HuffmanAc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecodeError {
    UnsupportedMarker(Unsupported),
    /// A marker segment is malformed. `offset` is the byte offset of the marker.
    MalformedSegment {
        offset: usize,
        reason: String,
    },
    MissingTable {
        kind: TableKind,
        id: u8,
    },
    CorruptEntropyStream(String),
    TruncatedStream,
    RestartMarkerMismatch {
        expected: u8,
        found: Option<u8>,
    },
    AlreadyDequantized,
    NotDequantized,
    /// Grids do not match the frame they are paired with.
    GridMismatch(String),
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::UnsupportedMarker(u) => write!(f, "unsupported: {u}"),
            DecodeError::MalformedSegment { offset, reason } => {
                write!(f, "malformed segment at offset {offset}: {reason}")
            }
            DecodeError::MissingTable { kind, id } => write!(f, "missing {kind:?} table {id}"),
            DecodeError::CorruptEntropyStream(why) => write!(f, "corrupt entropy stream: {why}"),
            DecodeError::TruncatedStream => f.write_str("truncated stream"),
            DecodeError::RestartMarkerMismatch {
                expected,
                found: Some(n),
            } => {
                write!(f, "expected RST{expected}, found RST{n}")
            }
            DecodeError::RestartMarkerMismatch { expected, found: None } => {
                write!(f, "expected RST{expected}, found no restart marker")
            }
            DecodeError::AlreadyDequantized => f.write_str("grid is already dequantized"),
            DecodeError::NotDequantized => f.write_str("grid must be dequantized first"),
            DecodeError::GridMismatch(why) => write!(f, "grid mismatch: {why}"),
        }
    }
}

impl std::error::Error for DecodeError {}

impl From<Unsupported> for DecodeError {
    fn from(u: Unsupported) -> Self {
        DecodeError::UnsupportedMarker(u)
    }
}

pub type Result<T> = std::result::Result<T, DecodeError>;
