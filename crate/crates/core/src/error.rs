use thiserror::Error;

use crate::party::PartyId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ring width {0} is not supported")]
    UnsupportedWidth(u32),

    #[error("width mismatch: {left} vs {right}")]
    WidthMismatch { left: u32, right: u32 },

    #[error("{0} is outside the representable fixed-point range")]
    FixedOverflow(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no shared key for party set {0}")]
    NoKey(String),

    #[error("channel closed ({from} -> {to})")]
    ChannelClosed { from: PartyId, to: PartyId },

    #[error("phase mismatch: expected {expected}, got {got}")]
    PhaseMismatch { expected: String, got: String },

    #[error("malformed message from {from}: {reason}")]
    Malformed { from: PartyId, reason: String },

    /// Terminal state of a party that detected an inconsistency.
    #[error("abort: {0}")]
    Abort(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn abort(msg: impl Into<String>) -> Error {
        Error::Abort(msg.into())
    }

    pub fn is_abort(&self) -> bool {
        matches!(self, Error::Abort(_) | Error::ChannelClosed { .. })
    }
}
