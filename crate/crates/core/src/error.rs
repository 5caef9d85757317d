use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{what}, line {line}: {msg}")]
    Format {
        what: &'static str,
        line: usize,
        msg: String,
    },

    #[error("insufficient labels: need at least {need}, have {have}")]
    InsufficientLabels { need: usize, have: usize },

    #[error("degenerate labels: training needs at least one positive and one negative example")]
    DegenerateLabels,

    #[error("degenerate labels for the {0} head: needs positive and negative examples")]
    DegenerateHead(crate::emoclass::EmotionLabel),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("model is untrained")]
    Untrained,

    #[error("no positive spans in training data")]
    NoPositiveSpans,

    #[error("empty mention set")]
    EmptyMentions,

    #[error("unknown mention {0}")]
    UnknownMention(String),

    #[error("missing prediction for post {0}")]
    MissingPrediction(String),

    #[error("length mismatch: {left} predicted vs {right} gold")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid label: {0}")]
    InvalidLabel(String),

    #[error("round {round} is awaiting {pending} labels")]
    AwaitingLabels { round: u32, pending: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn format(what: &'static str, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            what,
            line,
            msg: msg.into(),
        }
    }
}
