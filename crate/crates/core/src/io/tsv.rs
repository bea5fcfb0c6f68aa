//! Marker tables.
//!
//! Tab-separated, one marker per line:
//!
//! ```text
//! marker_id  chrom  pos  <sample_1>  ...  <sample_n>
//! ```
//!
//! `chrom` and `pos` may be `.` when a marker has no coordinates. Values
//! are decimal floats; `NA` or an empty cell marks a missing value. Lines
//! starting with `#` are skipped. Within a chromosome positions must be
//! strictly increasing and each chromosome must form one contiguous block.
//! Files ending in `.gz` are decompressed transparently.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ParseError;
use crate::error::{Error, Result};
use crate::matrix::{ColumnAnnotation, MarkerMatrix};

const FIXED_COLUMNS: [&str; 3] = ["marker_id", "chrom", "pos"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NaPolicy {
    #[default]
    Reject,
    /// Replace a missing cell by the median of that sample's observed markers.
    ImputeRowMedian,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Where a matrix came from and what was done to it on the way in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub inputs: Vec<InputDigest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub na_policy: Option<NaPolicy>,
    #[serde(default)]
    pub imputed_cells: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Provenance {
    pub fn merge(&mut self, other: Provenance) {
        self.inputs.extend(other.inputs);
        self.na_policy = self.na_policy.or(other.na_policy);
        self.imputed_cells += other.imputed_cells;
        self.notes.extend(other.notes);
    }
}

#[derive(Debug, Clone)]
pub struct LoadedMatrix {
    pub matrix: MarkerMatrix,
    pub provenance: Provenance,
}

struct HashingReader<R> {
    inner: R,
    hasher: Sha256,
}

impl<R: Read> Read for HashingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut file, &mut hasher).map_err(|e| Error::io(path, e))?;
    Ok(format!("{:x}", hasher.finalize()))
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "NA"
}

fn optional_field(cell: &str) -> Option<&str> {
    (!(cell.is_empty() || cell == "." || cell == "NA")).then_some(cell)
}

/// Streams a marker table and transposes it to samples-as-rows.
pub fn load_matrix(path: impl AsRef<Path>, na_policy: NaPolicy) -> Result<LoadedMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hashing = HashingReader {
        inner: file,
        hasher: Sha256::new(),
    };
    let gz = path.extension().is_some_and(|e| e == "gz");
    let matrix_and_count = {
        let source: Box<dyn Read + '_> = if gz {
            Box::new(MultiGzDecoder::new(&mut hashing))
        } else {
            Box::new(&mut hashing)
        };
        parse_table(BufReader::new(source), na_policy).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })?
    };
    // Drain anything the parser did not consume so the digest covers the file.
    std::io::copy(&mut hashing, &mut std::io::sink()).map_err(|e| Error::io(path, e))?;
    let (matrix, imputed) = matrix_and_count;
    let provenance = Provenance {
        inputs: vec![InputDigest {
            path: path.display().to_string(),
            sha256: format!("{:x}", hashing.hasher.finalize()),
        }],
        na_policy: Some(na_policy),
        imputed_cells: imputed,
        notes: Vec::new(),
    };
    Ok(LoadedMatrix { matrix, provenance })
}

/// Parses a marker table from any reader.
pub fn read_matrix(reader: impl BufRead, na_policy: NaPolicy) -> Result<MarkerMatrix> {
    parse_table(reader, na_policy).map(|(m, _)| m)
}

fn parse_table(reader: impl BufRead, na_policy: NaPolicy) -> Result<(MarkerMatrix, u64)> {
    let mut lines = reader.lines().enumerate();
    let (header_line, header) = loop {
        match lines.next() {
            Some((i, line)) => {
                let line = line.map_err(|e| Error::io("<input>", e))?;
                if line.trim().is_empty() || line.starts_with('#') {
                    continue;
                }
                break (i + 1, line);
            }
            None => return Err(ParseError::Empty.into()),
        }
    };
    let fields: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
    if fields.len() < 4 || fields[..3] != FIXED_COLUMNS {
        return Err(ParseError::Header {
            line: header_line,
            message: "expected 'marker_id<TAB>chrom<TAB>pos' followed by at least one sample column".into(),
        }
        .into());
    }
    let samples: Vec<String> = fields[3..].iter().map(|s| s.to_string()).collect();
    let width = fields.len();

    let mut columns = Vec::new();
    let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); samples.len()];
    let mut ids = HashSet::new();
    let mut closed_chroms: HashSet<String> = HashSet::new();
    let mut last: Option<(Option<String>, Option<u64>)> = None;

    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<input>", e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != width {
            return Err(ParseError::Ragged {
                line: line_no,
                expected: width,
                found: f.len(),
            }
            .into());
        }
        let marker_id = f[0].to_string();
        if !ids.insert(marker_id.clone()) {
            return Err(ParseError::DuplicateMarker { line: line_no, marker_id }.into());
        }
        let chrom = optional_field(f[1]).map(str::to_string);
        let pos = match optional_field(f[2]) {
            None => None,
            Some(p) => Some(p.parse::<u64>().map_err(|_| ParseError::NonNumeric {
                line: line_no,
                column: "pos".into(),
                value: p.to_string(),
            })?),
        };
        if let Some((prev_chrom, prev_pos)) = &last {
            if chrom == *prev_chrom {
                if let (Some(a), Some(b)) = (prev_pos, pos) {
                    if b <= *a {
                        return Err(ParseError::Unsorted {
                            line: line_no,
                            marker_id,
                            message: format!("position {b} does not increase past {a}"),
                        }
                        .into());
                    }
                }
            } else {
                if let Some(c) = prev_chrom {
                    closed_chroms.insert(c.clone());
                }
                if let Some(c) = &chrom {
                    if closed_chroms.contains(c) {
                        return Err(ParseError::Unsorted {
                            line: line_no,
                            marker_id,
                            message: format!("chromosome {c} appears in more than one block"),
                        }
                        .into());
                    }
                }
            }
        }
        last = Some((chrom.clone(), pos));

        for (s, cell) in f[3..].iter().enumerate() {
            let value = if is_missing(cell) {
                if na_policy == NaPolicy::Reject {
                    return Err(ParseError::Missing {
                        line: line_no,
                        column: samples[s].clone(),
                    }
                    .into());
                }
                None
            } else {
                let v = cell.parse::<f64>().ok().filter(|v| v.is_finite());
                Some(v.ok_or_else(|| ParseError::NonNumeric {
                    line: line_no,
                    column: samples[s].clone(),
                    value: cell.to_string(),
                })?)
            };
            cells[s].push(value);
        }
        columns.push(ColumnAnnotation {
            marker_id,
            chromosome: chrom,
            position_bp: pos,
        });
    }
    if columns.is_empty() {
        return Err(ParseError::Empty.into());
    }

    let mut imputed = 0u64;
    let mut rows = Vec::with_capacity(samples.len());
    for (s, sample) in cells.into_iter().enumerate() {
        let observed: Vec<f64> = sample.iter().flatten().copied().collect();
        let fill = if observed.len() < sample.len() {
            Some(median(observed).ok_or_else(|| {
                Error::InvalidMatrix(format!("sample {} has no observed values", samples[s]))
            })?)
        } else {
            None
        };
        rows.push(
            sample
                .into_iter()
                .map(|v| {
                    v.unwrap_or_else(|| {
                        imputed += 1;
                        fill.unwrap()
                    })
                })
                .collect(),
        );
    }
    Ok((MarkerMatrix::new(rows, samples, columns)?, imputed))
}

/// Median with the midpoint convention for even counts.
pub(crate) fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

/// Writes the matrix back in marker-table layout. Values use the shortest
/// representation that parses back to the same double.
pub fn write_matrix(path: impl AsRef<Path>, x: &MarkerMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_table(&mut w, x).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_table(w: &mut impl Write, x: &MarkerMatrix) -> std::io::Result<()> {
    write!(w, "marker_id\tchrom\tpos")?;
    for id in x.row_ids() {
        write!(w, "\t{id}")?;
    }
    writeln!(w)?;
    for (j, col) in x.columns().iter().enumerate() {
        let chrom = col.chromosome.as_deref().unwrap_or(".");
        let pos = col.position_bp.map_or(".".to_string(), |p| p.to_string());
        write!(w, "{}\t{chrom}\t{pos}", col.marker_id)?;
        for i in 0..x.n_rows() {
            write!(w, "\t{}", x.get(i, j))?;
        }
        writeln!(w)?;
    }
    Ok(())
}
