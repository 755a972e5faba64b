use thiserror::Error;

/// Errors produced by the stancekit library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed JSON: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("line {line}: invalid value for {field}: {message}")]
    InvalidField {
        line: usize,
        field: String,
        message: String,
    },

    #[error("invalid {field}: {message}")]
    InvalidValue { field: String, message: String },

    #[error("score {0} outside [-5, 5]")]
    ScoreOutOfRange(f64),

    #[error("fold count {k} out of range for {n} discussions")]
    FoldCount { k: usize, n: usize },

    #[error("text unit {0} has zero sentence count")]
    ZeroSentenceCount(String),

    #[error("cannot read {path}: {source}")]
    FileRead {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    FileWrite {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("thresholds must satisfy neg < 0 < pos, got pos={pos} neg={neg}")]
    ThresholdOrder { pos: f64, neg: f64 },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("training data contains a single class: {0}")]
    SingleClass(String),

    #[error("model format version {found} unsupported (reader supports {supported})")]
    ModelVersion { found: u32, supported: u32 },

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("gold/prediction length mismatch: {gold} vs {pred}")]
    LengthMismatch { gold: usize, pred: usize },

    #[error("paired t-test needs n >= 2, got {0}")]
    TooFewPairs(usize),

    #[error("bad configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
