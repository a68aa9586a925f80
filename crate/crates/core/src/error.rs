use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("ordering error: timestamp at row {row} ({timestamp}) does not increase")]
    Ordering { row: usize, timestamp: i64 },

    #[error("degenerate channel `{0}`")]
    DegenerateChannel(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unimputable rows (predictor missing at a target gap): {rows:?}")]
    UnimputableRows { rows: Vec<usize> },

    #[error("decomposition level {level} too deep for a signal of length {len}")]
    Level { level: usize, len: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("numeric fault at epoch {epoch}, batch {batch}: {what}")]
    NumericFault { epoch: usize, batch: usize, what: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("zero denominator in MAPE at index {index}")]
    ZeroDenominator { index: usize },

    #[error("not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Process exit status families used by the command-line front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Json(_) => ErrorClass::Config,
            Error::NumericFault { .. } => ErrorClass::Numeric,
            Error::Stage { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numeric => 4,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
