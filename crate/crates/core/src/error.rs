use std::path::PathBuf;

use crate::vectorize::Weighting;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown dataset adapter `{0}` (expected bgl, thunderbird, hdfs, hadoop or plain)")]
    UnknownAdapter(String),
    #[error("the {0} adapter needs a label file")]
    MissingLabelFile(&'static str),
    #[error("malformed label file {path}, line {line}: {reason}")]
    LabelFile {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("sequence `{0}` has no entry in the label file")]
    UnlabeledSequence(String),
    #[error("record {0} of a sequence-level record set has no sequence key")]
    MissingSeqKey(usize),
    #[error("fraction {0} is outside the allowed range")]
    FractionOutOfRange(f64),
    #[error("record set is empty")]
    EmptyRecordSet,
    #[error("train fraction {fraction} over {units} units leaves an empty {side} set")]
    DegenerateSplit {
        fraction: f64,
        units: usize,
        side: &'static str,
    },
    #[error("record {0} has an unknown label; curated labels are required here")]
    UnknownLabel(usize),
    #[error("cannot fit a vocabulary: {0}")]
    EmptyVocabulary(&'static str),
    #[error("expected a {expected:?}-weighted matrix, got {actual:?}")]
    WrongWeighting {
        expected: Weighting,
        actual: Weighting,
    },
    #[error("dimension mismatch: model has {expected} columns, matrix has {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("need {needed} documents, got {got}")]
    TooFewDocuments { needed: usize, got: usize },
    #[error("labels are single-class; {0} is undefined")]
    SingleClass(&'static str),
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("stage `{0}` was timed twice in one report")]
    DuplicateStage(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
