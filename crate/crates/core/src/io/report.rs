//! JSON reports and CSV tracks.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{ParseError, Provenance};
use crate::engine::{Direction, TestMode, TestResult};
use crate::error::{Error, Result};
use crate::matrix::{ColumnAnnotation, MarkerMatrix};
use crate::peeling::{PeelFinding, PeelReport, StopReason};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeakRecord {
    pub index: usize,
    pub marker_id: String,
    pub chrom: Option<String>,
    pub pos: Option<u64>,
}

impl PeakRecord {
    pub fn new(index: usize, col: &ColumnAnnotation) -> Self {
        Self {
            index,
            marker_id: col.marker_id.clone(),
            chrom: col.chromosome.clone(),
            pos: col.position_bp,
        }
    }
}

/// Result file written by `test` and `peel`. For `peel`, the top-level
/// fields describe the first iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub direction: Direction,
    pub statistic: String,
    pub mode: TestMode,
    pub n_samples: usize,
    pub n_markers: usize,
    pub t0: f64,
    pub p_value: f64,
    pub num_shifts: u64,
    pub exceed_count: u64,
    pub seed: u64,
    pub peak: PeakRecord,
    #[serde(default)]
    pub peel_findings: Vec<PeelFinding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peel_stop: Option<StopReason>,
    pub provenance: Provenance,
}

impl ReportFile {
    pub fn from_test(result: &TestResult, x: &MarkerMatrix, provenance: Provenance) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            command: "test".into(),
            direction: result.direction,
            statistic: result.statistic.clone(),
            mode: result.mode,
            n_samples: x.n_rows(),
            n_markers: x.n_cols(),
            t0: result.t0,
            p_value: result.p_value,
            num_shifts: result.num_shifts,
            exceed_count: result.exceed_count,
            seed: result.seed,
            peak: PeakRecord::new(result.peak_index, &result.peak),
            peel_findings: Vec::new(),
            peel_stop: None,
            provenance,
        }
    }

    pub fn from_peel(
        report: &PeelReport,
        direction: Direction,
        statistic: &str,
        x: &MarkerMatrix,
        provenance: Provenance,
    ) -> Self {
        let first = &report.findings[0];
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            command: "peel".into(),
            direction,
            statistic: statistic.to_string(),
            mode: TestMode::MonteCarlo,
            n_samples: x.n_rows(),
            n_markers: x.n_cols(),
            t0: first.t0,
            p_value: first.p_value,
            num_shifts: first.num_shifts,
            exceed_count: first.exceed_count,
            seed: first.seed,
            peak: PeakRecord::new(first.peak_index, &first.peak),
            peel_findings: report.findings.clone(),
            peel_stop: Some(report.stop),
            provenance,
        }
    }
}

fn json_error(e: serde_json::Error) -> Error {
    use serde_json::error::Category;
    match e.classify() {
        Category::Data => Error::Schema(e.to_string()),
        Category::Io | Category::Syntax | Category::Eof => ParseError::Json { message: e.to_string() }.into(),
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(json_error)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(json_error)
}

pub fn write_report(path: impl AsRef<Path>, report: &ReportFile) -> Result<()> {
    write_json(path, report)
}

/// Reads a report, rejecting files written under another schema version.
pub fn read_report(path: impl AsRef<Path>) -> Result<ReportFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(json_error)?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == REPORT_SCHEMA_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::Schema(format!(
                "report schema version {v} is not supported (expected {REPORT_SCHEMA_VERSION})"
            )))
        }
        None => return Err(Error::Schema("report has no schema_version".into())),
    }
    serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))
}

/// One row per marker: `index,marker_id,chrom,pos,value`.
pub fn write_column_stats(path: impl AsRef<Path>, columns: &[ColumnAnnotation], values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    if columns.len() != values.len() {
        return Err(Error::Dimension(format!(
            "{} annotations for {} column statistics",
            columns.len(),
            values.len()
        )));
    }
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Schema(format!("{other:?}")),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["index", "marker_id", "chrom", "pos", "value"]).map_err(csv_err)?;
    for (j, (col, v)) in columns.iter().zip(values).enumerate() {
        w.write_record([
            j.to_string(),
            col.marker_id.clone(),
            col.chromosome.clone().unwrap_or_default(),
            col.position_bp.map(|p| p.to_string()).unwrap_or_default(),
            v.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::InputDigest;

    fn sample_report() -> ReportFile {
        ReportFile {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: TOOL_VERSION.into(),
            command: "peel".into(),
            direction: Direction::Gain,
            statistic: "sum".into(),
            mode: TestMode::MonteCarlo,
            n_samples: 3,
            n_markers: 40,
            t0: 0.1 + 0.2,
            p_value: 1.0 / 3.0,
            num_shifts: 10_000,
            exceed_count: 3333,
            seed: u64::MAX,
            peak: PeakRecord {
                index: 7,
                marker_id: "rs1".into(),
                chrom: Some("X".into()),
                pos: Some(123_456_789),
            },
            peel_findings: vec![PeelFinding {
                iteration: 0,
                peak_index: 7,
                peak: ColumnAnnotation::genomic("rs1", "X", 123_456_789),
                t0: std::f64::consts::PI * 1e-300,
                p_value: 1e-4,
                exceed_count: 0,
                num_shifts: 10_000,
                seed: u64::MAX,
                region: Some([5, 9]),
            }],
            peel_stop: Some(StopReason::NotSignificant),
            provenance: Provenance {
                inputs: vec![InputDigest {
                    path: "a.tsv".into(),
                    sha256: "00".repeat(32),
                }],
                na_policy: None,
                imputed_cells: 0,
                notes: vec![],
            },
        }
    }

    #[test]
    fn report_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let report = sample_report();
        write_report(&path, &report).unwrap();
        let back = read_report(&path).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.t0.to_bits(), report.t0.to_bits());
        assert_eq!(back.peel_findings[0].t0.to_bits(), report.peel_findings[0].t0.to_bits());
    }

    #[test]
    fn schema_version_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let mut report = sample_report();
        report.schema_version = 99;
        write_report(&path, &report).unwrap();
        assert!(matches!(read_report(&path), Err(Error::Schema(msg)) if msg.contains("99")));
    }

    #[test]
    fn truncated_file_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        write_report(&path, &sample_report()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(read_report(&path), Err(Error::Parse(ParseError::Json { .. }))));
    }

    #[test]
    fn column_stats_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let cols = vec![ColumnAnnotation::genomic("a,b", "1", 5), ColumnAnnotation::new("c")];
        write_column_stats(&path, &cols, &[1.5, -2.0]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "index,marker_id,chrom,pos,value\n0,\"a,b\",1,5,1.5\n1,c,,,-2\n");
        assert!(write_column_stats(&path, &cols, &[1.0]).is_err());
    }
}
