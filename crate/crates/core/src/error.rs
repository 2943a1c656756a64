//! Error type shared by every module in the crate.

use thiserror::Error;

/// All failure modes surfaced by the library.
///
/// The variants are grouped by how a caller should react: `InvalidInput`
/// means the arguments can never work, `Refused` means the arguments are
/// legal but exceed a configured size guard, and the remaining variants
/// are runtime failures of otherwise valid requests.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent arguments (dimension mismatches,
    /// out-of-range indices, non-finite data, empty inputs).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The request is well-formed but exceeds a size guard and was not
    /// attempted.
    #[error("refused: {0}")]
    Refused(String),

    /// A weight vector summed to zero where a positive mass was required.
    #[error("weight vector has no positive entry")]
    ZeroWeights,

    /// Every candidate weight at one stage of a chain sampler vanished,
    /// so the conditional distribution is numerically undefined.
    #[error("degenerate conditional weights at stage {stage}")]
    DegenerateWeights { stage: usize },

    /// Rejection sampling gave up after the configured number of tries.
    #[error("no accepted sample after {tries} tries")]
    MaxTriesExceeded { tries: u64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Shorthand for an [`Error::InvalidInput`] with a formatted message.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Shorthand for an [`Error::Refused`] with a formatted message.
    pub fn refused(msg: impl Into<String>) -> Self {
        Error::Refused(msg.into())
    }
}
