use std::io;

use thiserror::Error;

/// Errors produced anywhere in the codec, metrics and competition pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("truncated input: {0}")]
    Truncation(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("schedule invariant violated at display index {index}: {reason}")]
    ScheduleInvariant { index: usize, reason: String },
    #[error("bitstream error: {0}")]
    Bitstream(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("rate-distortion curves do not overlap: {0}")]
    Overlap(String),
    #[error("budget of {budget_bits} bits is infeasible; minimum achievable total is {min_bits} bits")]
    Budget { budget_bits: u64, min_bits: u64 },
    #[error("unsupported bitstream version {0}")]
    Version(u8),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Truncation(_) | Error::Bitstream(_) | Error::Version(_) => 3,
            Error::Budget { .. } => 4,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}
