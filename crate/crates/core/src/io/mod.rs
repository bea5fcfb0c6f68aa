//! File formats, application transforms and report serialization.

mod report;
mod transform;
mod tsv;

pub use report::{
    read_json, read_report, write_column_stats, write_json, write_report, PeakRecord, ReportFile,
    REPORT_SCHEMA_VERSION, TOOL_VERSION,
};
pub use transform::{paired_difference, zscore_transform, ZscoreOutcome, P_VALUE_ONE_CLAMP};
pub(crate) use tsv::median;
pub use tsv::{load_matrix, read_matrix, sha256_file, write_matrix, InputDigest, LoadedMatrix, NaPolicy, Provenance};

use thiserror::Error;

/// Input-format diagnostics. Line numbers are 1-based and count the header.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: bad header: {message}")]
    Header { line: usize, message: String },

    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged { line: usize, expected: usize, found: usize },

    #[error("line {line}: column {column}: '{value}' is not a finite number")]
    NonNumeric { line: usize, column: String, value: String },

    #[error("line {line}: column {column}: missing value (NA policy is reject)")]
    Missing { line: usize, column: String },

    #[error("line {line}: marker {marker_id}: {message}")]
    Unsorted { line: usize, marker_id: String, message: String },

    #[error("line {line}: duplicate marker id {marker_id}")]
    DuplicateMarker { line: usize, marker_id: String },

    #[error("file has no marker rows")]
    Empty,

    #[error("line {line}: {message}")]
    Spec { line: usize, message: String },

    #[error("malformed JSON: {message}")]
    Json { message: String },
}
