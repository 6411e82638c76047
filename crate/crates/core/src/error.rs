use std::path::PathBuf;

use chrono::NaiveDate;

/// Errors raised anywhere in the analysis pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: value {value} for question `{question}` outside [{min}, {max}]")]
    Range {
        line: u64,
        question: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("degenerate scale for `{0}`: standard deviation is zero")]
    DegenerateScale(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("k = {k} is infeasible with {distinct} distinct rows")]
    InfeasibleK { k: usize, distinct: usize },

    #[error("score undefined: {0}")]
    UndefinedScore(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("invalid config `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("incomplete record for {participant} on {date}: missing {missing}")]
    Completeness {
        participant: String,
        date: NaiveDate,
        missing: String,
    },

    #[error("no event date for participant `{0}`")]
    MissingEvent(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
