use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: file is not valid UTF-8")]
    Utf8 { path: PathBuf },

    #[error("{context}:{line}: {message}")]
    Parse {
        context: String,
        line: usize,
        message: String,
    },

    #[error("duplicate phoneme symbol `{0}`")]
    DuplicateSymbol(String),

    #[error("unknown phoneme class `{0}`")]
    UnknownClass(String),

    #[error("inventory is missing the `{0}:` header")]
    MissingHeader(&'static str),

    #[error("inventory declares {declared} phonemes but lists {found}")]
    CountMismatch { declared: usize, found: usize },

    #[error("symbol `{symbol}` is not in the inventory (utterance {utterance})")]
    UnknownSymbol { symbol: String, utterance: String },

    #[error("utterance {utterance}: segment {onset}..{offset} overlaps the previous one")]
    Overlap {
        utterance: String,
        onset: String,
        offset: String,
    },

    #[error("utterance {utterance}: segment offset {offset} is not after onset {onset}")]
    EmptySegment {
        utterance: String,
        onset: String,
        offset: String,
    },

    #[error("manifest is missing field `{0}`")]
    MissingField(&'static str),

    #[error("one-to-one track requires vocab_size = {expected} (|P|+1), got {found}")]
    VocabMismatch { expected: usize, found: usize },

    #[error("utterance sets differ: {} missing from units {:?}, {} missing from gold {:?}", missing_in_units.len(), missing_in_units, missing_in_gold.len(), missing_in_gold)]
    UtteranceMismatch {
        missing_in_units: Vec<String>,
        missing_in_gold: Vec<String>,
    },

    #[error("utterance {utterance}: {frames} unit frames vs gold duration {duration_s} s at {frame_rate} Hz exceeds the 1-frame tolerance")]
    LengthMismatch {
        utterance: String,
        frames: usize,
        duration_s: String,
        frame_rate: String,
    },

    #[error("utterance {utterance}: frame {frame} lies beyond the utterance duration")]
    FrameOutOfRange { utterance: String, frame: usize },

    #[error("unknown utterance `{0}`")]
    UnknownUtterance(String),

    #[error("unit id {unit} is outside the vocabulary of size {vocab}")]
    UnitOutOfRange { unit: u32, vocab: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("phone entropy is zero: PNMI is undefined")]
    ZeroEntropy,

    #[error("empty input: {0}")]
    Empty(String),

    #[error("boundary list is not sorted")]
    Unsorted,

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("no valid ABX cells")]
    NoAbxCells,

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by the content
    /// of the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub(crate) fn read_utf8(path: &std::path::Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|_| Error::Utf8 {
        path: path.to_path_buf(),
    })
}
