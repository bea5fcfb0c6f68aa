//! Marker matrices, the cyclic shift action on their rows, and the
//! column-wise (local) and genome-wide (global) summary statistics.
//!
//! Rows are samples and columns are markers. All indexing is 0-based: a
//! shift of index `k` moves entry `(j + k) mod m` into position `j`.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Genomic annotation of one marker column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnAnnotation {
    pub marker_id: String,
    #[serde(rename = "chrom")]
    pub chromosome: Option<String>,
    #[serde(rename = "pos")]
    pub position_bp: Option<u64>,
}

impl ColumnAnnotation {
    pub fn new(marker_id: impl Into<String>) -> Self {
        Self {
            marker_id: marker_id.into(),
            chromosome: None,
            position_bp: None,
        }
    }

    pub fn genomic(marker_id: impl Into<String>, chromosome: impl Into<String>, position_bp: u64) -> Self {
        Self {
            marker_id: marker_id.into(),
            chromosome: Some(chromosome.into()),
            position_bp: Some(position_bp),
        }
    }
}

/// An `n x m` matrix of finite observations, samples as rows and markers as
/// columns. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerMatrix {
    values: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    row_ids: Vec<String>,
    columns: Vec<ColumnAnnotation>,
}

impl MarkerMatrix {
    /// Builds a matrix from row vectors, validating every invariant.
    pub fn new(rows: Vec<Vec<f64>>, row_ids: Vec<String>, columns: Vec<ColumnAnnotation>) -> Result<Self> {
        let n_rows = rows.len();
        if n_rows == 0 {
            return Err(Error::InvalidMatrix("matrix needs at least one row".into()));
        }
        let n_cols = rows[0].len();
        let mut values = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {n_cols}",
                    row.len()
                )));
            }
            values.extend(row);
        }
        Self::from_flat(values, n_rows, n_cols, row_ids, columns)
    }

    /// Builds a matrix with generated identifiers (`S0..`, `M0..`) and no
    /// genomic coordinates.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        Self::new(rows, default_row_ids(n), default_columns(m))
    }

    /// Row-major constructor.
    pub fn from_flat(
        values: Vec<f64>,
        n_rows: usize,
        n_cols: usize,
        row_ids: Vec<String>,
        columns: Vec<ColumnAnnotation>,
    ) -> Result<Self> {
        if n_rows == 0 {
            return Err(Error::InvalidMatrix("matrix needs at least one row".into()));
        }
        if n_cols < 2 {
            return Err(Error::InvalidMatrix(format!("matrix needs at least two markers, got {n_cols}")));
        }
        if values.len() != n_rows * n_cols {
            return Err(Error::InvalidMatrix(format!(
                "{} values do not fill a {n_rows} x {n_cols} matrix",
                values.len()
            )));
        }
        if row_ids.len() != n_rows {
            return Err(Error::InvalidMatrix(format!(
                "{} row identifiers for {n_rows} rows",
                row_ids.len()
            )));
        }
        if columns.len() != n_cols {
            return Err(Error::InvalidMatrix(format!(
                "{} column annotations for {n_cols} columns",
                columns.len()
            )));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite value {} at row {}, column {}",
                values[idx],
                idx / n_cols,
                idx % n_cols
            )));
        }
        validate_columns(&columns)?;
        Ok(Self {
            values,
            n_rows,
            n_cols,
            row_ids,
            columns,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn columns(&self) -> &[ColumnAnnotation] {
        &self.columns
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Same annotations, new values. Used by transforms that preserve shape.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::from_flat(values, self.n_rows, self.n_cols, self.row_ids.clone(), self.columns.clone())
    }

    /// Restricts the matrix to the columns of one chromosome.
    pub fn select_chromosome(&self, chromosome: &str) -> Result<Self> {
        let keep: Vec<usize> = (0..self.n_cols)
            .filter(|&j| self.columns[j].chromosome.as_deref() == Some(chromosome))
            .collect();
        if keep.is_empty() {
            return Err(Error::InvalidMatrix(format!("no markers on chromosome {chromosome}")));
        }
        let mut values = Vec::with_capacity(self.n_rows * keep.len());
        for row in self.rows() {
            values.extend(keep.iter().map(|&j| row[j]));
        }
        let columns = keep.iter().map(|&j| self.columns[j].clone()).collect();
        Self::from_flat(values, self.n_rows, keep.len(), self.row_ids.clone(), columns)
    }
}

pub(crate) fn default_row_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("S{i}")).collect()
}

pub(crate) fn default_columns(m: usize) -> Vec<ColumnAnnotation> {
    (0..m).map(|j| ColumnAnnotation::new(format!("M{j}"))).collect()
}

/// Marker ids are unique. When every column carries coordinates, each
/// chromosome occupies one contiguous block and positions strictly increase
/// inside it.
fn validate_columns(columns: &[ColumnAnnotation]) -> Result<()> {
    let mut seen = HashSet::with_capacity(columns.len());
    for c in columns {
        if !seen.insert(c.marker_id.as_str()) {
            return Err(Error::InvalidMatrix(format!("duplicate marker id {}", c.marker_id)));
        }
    }
    let genomic = columns
        .iter()
        .all(|c| c.chromosome.is_some() && c.position_bp.is_some());
    if !genomic {
        return Ok(());
    }
    let mut finished: HashSet<&str> = HashSet::new();
    for pair in columns.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let (ca, cb) = (a.chromosome.as_deref().unwrap(), b.chromosome.as_deref().unwrap());
        if ca == cb {
            if b.position_bp <= a.position_bp {
                return Err(Error::InvalidMatrix(format!(
                    "marker {} at {cb}:{} does not follow {} at {ca}:{}",
                    b.marker_id,
                    b.position_bp.unwrap(),
                    a.marker_id,
                    a.position_bp.unwrap()
                )));
            }
        } else {
            finished.insert(ca);
            if finished.contains(cb) {
                return Err(Error::InvalidMatrix(format!(
                    "chromosome {cb} is split into several blocks (marker {})",
                    b.marker_id
                )));
            }
        }
    }
    Ok(())
}

/// One cyclic offset per row, each in `[0, m)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftVector {
    offsets: Vec<usize>,
}

impl ShiftVector {
    pub fn new(offsets: Vec<usize>, m: usize) -> Result<Self> {
        if let Some((i, k)) = offsets.iter().enumerate().find(|(_, &k)| k >= m) {
            return Err(Error::Range(format!("offset {k} for row {i} is outside [0, {m})")));
        }
        Ok(Self { offsets })
    }

    pub fn zeros(n: usize) -> Self {
        Self { offsets: vec![0; n] }
    }

    pub fn constant(n: usize, k: usize, m: usize) -> Result<Self> {
        Self::new(vec![k; n], m)
    }

    /// Trusted constructor for offsets already known to be in range.
    pub(crate) fn from_offsets_unchecked(offsets: Vec<usize>) -> Self {
        Self { offsets }
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// The offsets that undo this shift.
    pub fn inverse(&self, m: usize) -> Self {
        Self {
            offsets: self.offsets.iter().map(|&k| (m - k) % m).collect(),
        }
    }
}

/// Rotates `x` left by `k`: output `j` is `x[(j + k) mod m]`.
pub fn cyclic_shift_row(x: &[f64], k: usize) -> Result<Vec<f64>> {
    let m = x.len();
    if m == 0 {
        return Err(Error::Dimension("cannot shift an empty row".into()));
    }
    if k >= m {
        return Err(Error::Range(format!("shift {k} is outside [0, {m})")));
    }
    let mut out = Vec::with_capacity(m);
    out.extend_from_slice(&x[k..]);
    out.extend_from_slice(&x[..k]);
    Ok(out)
}

/// Applies offset `k_i` to row `i`; annotations are carried over unchanged.
pub fn apply_shift(x: &MarkerMatrix, shift: &ShiftVector) -> Result<MarkerMatrix> {
    if shift.len() != x.n_rows() {
        return Err(Error::Dimension(format!(
            "shift vector has {} offsets for {} rows",
            shift.len(),
            x.n_rows()
        )));
    }
    let m = x.n_cols();
    let mut values = Vec::with_capacity(x.values.len());
    for (row, &k) in x.rows().zip(shift.offsets()) {
        if k >= m {
            return Err(Error::Range(format!("shift {k} is outside [0, {m})")));
        }
        values.extend_from_slice(&row[k..]);
        values.extend_from_slice(&row[..k]);
    }
    Ok(MarkerMatrix {
        values,
        n_rows: x.n_rows,
        n_cols: x.n_cols,
        row_ids: x.row_ids.clone(),
        columns: x.columns.clone(),
    })
}

/// A user-supplied column summary. It sees only the column's values.
#[derive(Clone)]
pub struct CustomStatistic {
    name: String,
    func: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl CustomStatistic {
    pub fn new(name: impl Into<String>, func: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            func: Arc::new(func),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomStatistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomStatistic").field("name", &self.name).finish()
    }
}

/// Per-marker summary `s_j` of one column.
#[derive(Debug, Clone, Default)]
pub enum LocalStatistic {
    #[default]
    Sum,
    Mean,
    Custom(CustomStatistic),
}

impl LocalStatistic {
    pub fn name(&self) -> &str {
        match self {
            LocalStatistic::Sum => "sum",
            LocalStatistic::Mean => "mean",
            LocalStatistic::Custom(c) => c.name(),
        }
    }
}

/// Genome-wide reduction of the local statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlobalStatistic {
    Max,
    Min,
}

impl GlobalStatistic {
    /// Extreme value and the lowest index attaining it.
    pub fn evaluate(self, s: &[f64]) -> Result<(f64, usize)> {
        if s.is_empty() {
            return Err(Error::Dimension("global statistic of an empty vector".into()));
        }
        Ok(self.evaluate_nonempty(s))
    }

    #[inline]
    pub(crate) fn evaluate_nonempty(self, s: &[f64]) -> (f64, usize) {
        let mut best = s[0];
        let mut idx = 0;
        match self {
            GlobalStatistic::Max => {
                for (j, &v) in s.iter().enumerate().skip(1) {
                    if v > best {
                        best = v;
                        idx = j;
                    }
                }
            }
            GlobalStatistic::Min => {
                for (j, &v) in s.iter().enumerate().skip(1) {
                    if v < best {
                        best = v;
                        idx = j;
                    }
                }
            }
        }
        (best, idx)
    }
}

/// `s_j` for every column `j`.
pub fn column_stats(x: &MarkerMatrix, stat: &LocalStatistic) -> Vec<f64> {
    let mut ws = ShiftWorkspace::new(x.n_rows(), x.n_cols());
    ws.column_stats(x, None, stat).to_vec()
}

/// `(value, peak_index)` of the global statistic; ties go to the lowest index.
pub fn global_stat(s: &[f64], g: GlobalStatistic) -> Result<(f64, usize)> {
    g.evaluate(s)
}

/// The composite statistic `T(X) = g(s_1(X), ..., s_m(X))`.
///
/// Any such statistic is invariant under constant shifts, because a
/// constant shift only rotates the vector of local statistics and both
/// reductions are rotation invariant.
#[derive(Debug, Clone)]
pub struct TestStatistic {
    pub local: LocalStatistic,
    pub global: GlobalStatistic,
}

impl TestStatistic {
    pub fn new(local: LocalStatistic, global: GlobalStatistic) -> Self {
        Self { local, global }
    }

    pub fn max_sum() -> Self {
        Self::new(LocalStatistic::Sum, GlobalStatistic::Max)
    }

    pub fn evaluate(&self, x: &MarkerMatrix) -> (f64, usize) {
        let mut ws = ShiftWorkspace::new(x.n_rows(), x.n_cols());
        ws.evaluate(x, None, self)
    }
}

/// Scratch buffers for evaluating statistics on shifted matrices without
/// materializing them. One per worker.
#[derive(Debug, Clone)]
pub struct ShiftWorkspace {
    stats: Vec<f64>,
    column: Vec<f64>,
}

impl ShiftWorkspace {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            stats: vec![0.0; m],
            column: vec![0.0; n],
        }
    }

    /// Column statistics of `sigma_shift(x)`, or of `x` itself when `shift`
    /// is `None`. Sums accumulate in row order, so the unshifted and the
    /// identity-shifted computations agree bit for bit.
    pub fn column_stats(&mut self, x: &MarkerMatrix, shift: Option<&[usize]>, stat: &LocalStatistic) -> &[f64] {
        let m = x.n_cols();
        let n = x.n_rows();
        self.stats.resize(m, 0.0);
        self.column.resize(n, 0.0);
        match stat {
            LocalStatistic::Sum | LocalStatistic::Mean => {
                self.stats.fill(0.0);
                for (i, row) in x.rows().enumerate() {
                    let k = shift.map_or(0, |s| s[i]);
                    let (head, tail) = self.stats.split_at_mut(m - k);
                    for (acc, v) in head.iter_mut().zip(&row[k..]) {
                        *acc += *v;
                    }
                    for (acc, v) in tail.iter_mut().zip(&row[..k]) {
                        *acc += *v;
                    }
                }
                if matches!(stat, LocalStatistic::Mean) {
                    let nf = n as f64;
                    for v in &mut self.stats {
                        *v /= nf;
                    }
                }
            }
            LocalStatistic::Custom(c) => {
                for j in 0..m {
                    for i in 0..n {
                        let k = shift.map_or(0, |s| s[i]);
                        let src = if j + k >= m { j + k - m } else { j + k };
                        self.column[i] = x.get(i, src);
                    }
                    self.stats[j] = (c.func)(&self.column);
                }
            }
        }
        &self.stats
    }

    pub fn evaluate(&mut self, x: &MarkerMatrix, shift: Option<&[usize]>, t: &TestStatistic) -> (f64, usize) {
        let global = t.global;
        global.evaluate_nonempty(self.column_stats(x, shift, &t.local))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> MarkerMatrix {
        MarkerMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn shift_row_examples() {
        assert_eq!(cyclic_shift_row(&[1., 2., 3., 4.], 0).unwrap(), vec![1., 2., 3., 4.]);
        assert_eq!(cyclic_shift_row(&[1., 2., 3., 4.], 1).unwrap(), vec![2., 3., 4., 1.]);
        let x = [3., 1., 4., 1., 5.];
        let once = cyclic_shift_row(&x, 2).unwrap();
        assert_eq!(cyclic_shift_row(&once, 3).unwrap(), x.to_vec());
    }

    #[test]
    fn shift_row_rejects_out_of_range() {
        assert!(matches!(cyclic_shift_row(&[1., 2.], 2), Err(Error::Range(_))));
        assert!(matches!(cyclic_shift_row(&[], 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn apply_shift_examples() {
        let x = m(&[&[1., 2., 3.], &[4., 5., 6.]]);
        assert_eq!(apply_shift(&x, &ShiftVector::zeros(2)).unwrap(), x);
        let s = ShiftVector::new(vec![1, 2], 3).unwrap();
        assert_eq!(apply_shift(&x, &s).unwrap().to_rows(), vec![vec![2., 3., 1.], vec![6., 4., 5.]]);
        let a = apply_shift(&x, &ShiftVector::constant(2, 1, 3).unwrap()).unwrap();
        let b = apply_shift(&a, &ShiftVector::constant(2, 2, 3).unwrap()).unwrap();
        assert_eq!(b, x);
    }

    #[test]
    fn apply_shift_length_mismatch() {
        let x = m(&[&[1., 2., 3.], &[4., 5., 6.]]);
        let s = ShiftVector::new(vec![1], 3).unwrap();
        assert!(matches!(apply_shift(&x, &s), Err(Error::Dimension(_))));
        assert!(matches!(ShiftVector::new(vec![3], 3), Err(Error::Range(_))));
    }

    #[test]
    fn column_stat_examples() {
        let x = m(&[&[1., 2.], &[3., 4.]]);
        assert_eq!(column_stats(&x, &LocalStatistic::Sum), vec![4., 6.]);
        assert_eq!(column_stats(&x, &LocalStatistic::Mean), vec![2., 3.]);
        assert_eq!(column_stats(&m(&[&[0., 0., 0.]]), &LocalStatistic::Sum), vec![0., 0., 0.]);
        let range = CustomStatistic::new("range", |c: &[f64]| {
            c.iter().cloned().fold(f64::MIN, f64::max) - c.iter().cloned().fold(f64::MAX, f64::min)
        });
        assert_eq!(column_stats(&x, &LocalStatistic::Custom(range)), vec![2., 2.]);
    }

    #[test]
    fn global_stat_examples() {
        assert_eq!(global_stat(&[4., 6.], GlobalStatistic::Max).unwrap(), (6., 1));
        assert_eq!(global_stat(&[5., 5., 5.], GlobalStatistic::Max).unwrap(), (5., 0));
        assert_eq!(global_stat(&[4., 6.], GlobalStatistic::Min).unwrap(), (4., 0));
        assert!(matches!(global_stat(&[], GlobalStatistic::Max), Err(Error::Dimension(_))));
    }

    #[test]
    fn workspace_matches_materialized_shift() {
        let x = m(&[&[1., 7., 3., 2.], &[4., 5., 6., 0.5], &[9., 1., 1., 2.]]);
        let s = ShiftVector::new(vec![3, 0, 2], 4).unwrap();
        let shifted = apply_shift(&x, &s).unwrap();
        let mut ws = ShiftWorkspace::new(3, 4);
        let wide = CustomStatistic::new("sum", |c: &[f64]| c.iter().sum());
        for stat in [LocalStatistic::Sum, LocalStatistic::Mean, LocalStatistic::Custom(wide)] {
            let direct = column_stats(&shifted, &stat);
            assert_eq!(ws.column_stats(&x, Some(s.offsets()), &stat), direct.as_slice());
        }
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(MarkerMatrix::from_rows(vec![]).is_err());
        assert!(MarkerMatrix::from_rows(vec![vec![1.0]]).is_err());
        assert!(MarkerMatrix::from_rows(vec![vec![1.0, f64::NAN]]).is_err());
        assert!(MarkerMatrix::from_rows(vec![vec![1.0, 2.0], vec![1.0]]).is_err());
        let dup = vec![ColumnAnnotation::new("a"), ColumnAnnotation::new("a")];
        assert!(MarkerMatrix::new(vec![vec![1.0, 2.0]], vec!["s".into()], dup).is_err());
        let unsorted = vec![ColumnAnnotation::genomic("a", "1", 20), ColumnAnnotation::genomic("b", "1", 10)];
        assert!(MarkerMatrix::new(vec![vec![1.0, 2.0]], vec!["s".into()], unsorted).is_err());
        let split = vec![
            ColumnAnnotation::genomic("a", "1", 10),
            ColumnAnnotation::genomic("b", "2", 10),
            ColumnAnnotation::genomic("c", "1", 30),
        ];
        assert!(MarkerMatrix::new(vec![vec![1.0, 2.0, 3.0]], vec!["s".into()], split).is_err());
    }

    #[test]
    fn select_chromosome_keeps_block() {
        let cols = vec![
            ColumnAnnotation::genomic("a", "1", 10),
            ColumnAnnotation::genomic("b", "1", 20),
            ColumnAnnotation::genomic("c", "2", 5),
            ColumnAnnotation::genomic("d", "2", 6),
        ];
        let x = MarkerMatrix::new(vec![vec![1., 2., 3., 4.]], vec!["s".into()], cols).unwrap();
        let chr2 = x.select_chromosome("2").unwrap();
        assert_eq!(chr2.to_rows(), vec![vec![3., 4.]]);
        assert_eq!(chr2.columns()[0].marker_id, "c");
    }
}
