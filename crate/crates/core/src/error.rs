use std::path::PathBuf;

use thiserror::Error;

use crate::io::ParseError;
use crate::null_models::ConditionReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("chain is not ergodic: {0}")]
    NotErgodic(String),

    #[error("null model violates the consistency conditions: {0}")]
    Conditions(Box<ConditionReport>),

    #[error("enumeration refused: {required} evaluations exceed the budget of {budget}")]
    BudgetExceeded { required: u128, budget: u64 },

    #[error("degenerate likelihood support: {0}")]
    DegenerateSupport(String),

    #[error("annotation mismatch at marker {marker_id}: {detail}")]
    AnnotationMismatch { marker_id: String, detail: String },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("report schema: {0}")]
    Schema(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
