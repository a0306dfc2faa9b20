use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the encoder, decoders, metrics and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("format error: {0}")]
    Format(#[from] FormatError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Distinguishable failures when parsing the binary code/event files,
/// level tables and audio containers.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated header: {0} bytes")]
    TruncatedHeader(usize),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },

    #[error("trailing bytes after payload: {0}")]
    TrailingBytes(u64),

    #[error("record count mismatch: header says {header}, payload holds {payload}")]
    CountMismatch { header: u64, payload: u64 },

    #[error("record {index}: {reason}")]
    InvalidRecord { index: u64, reason: String },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("unsupported flags {0:#x}")]
    UnsupportedFlags(u32),

    #[error("audio: {0}")]
    Audio(String),

    #[error("level table: {0}")]
    LevelTable(String),

    #[error("channel {channel} outside 0..{n_channels}")]
    ChannelOutOfRange { channel: u32, n_channels: u32 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
