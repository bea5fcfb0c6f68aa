//! Application-level transforms applied before testing.

use crate::error::{Error, Result};
use crate::matrix::{ColumnAnnotation, MarkerMatrix};
use crate::special::inv_norm_cdf;

/// Largest double below one. Used in place of `p = 1`, whose normal
/// quantile is infinite.
pub const P_VALUE_ONE_CLAMP: f64 = 1.0 - f64::EPSILON / 2.0;

/// Tumor minus matched normal, marker by marker. Both matrices must carry the
/// same samples in the same order and identical marker annotations.
pub fn paired_difference(tumor: &MarkerMatrix, normal: &MarkerMatrix) -> Result<MarkerMatrix> {
    if (tumor.n_rows(), tumor.n_cols()) != (normal.n_rows(), normal.n_cols()) {
        return Err(Error::Dimension(format!(
            "tumor is {}x{}, normal is {}x{}",
            tumor.n_rows(),
            tumor.n_cols(),
            normal.n_rows(),
            normal.n_cols()
        )));
    }
    if let Some((a, b)) = tumor
        .row_ids()
        .iter()
        .zip(normal.row_ids())
        .find(|(a, b)| a != b)
    {
        return Err(Error::InvalidMatrix(format!(
            "sample pairing differs: tumor has {a} where normal has {b}"
        )));
    }
    for (t, n) in tumor.columns().iter().zip(normal.columns()) {
        if t != n {
            return Err(Error::AnnotationMismatch {
                marker_id: t.marker_id.clone(),
                detail: format!("tumor has {} but normal has {}", describe(t), describe(n)),
            });
        }
    }
    let values = tumor
        .values()
        .iter()
        .zip(normal.values())
        .map(|(a, b)| a - b)
        .collect();
    tumor.with_values(values)
}

fn describe(c: &ColumnAnnotation) -> String {
    let chrom = c.chromosome.as_deref().unwrap_or(".");
    let pos = c.position_bp.map_or(".".to_string(), |p| p.to_string());
    format!("{} at {chrom}:{pos}", c.marker_id)
}

#[derive(Debug, Clone)]
pub struct ZscoreOutcome {
    pub matrix: MarkerMatrix,
    /// Cells where `p = 1` was clamped to [`P_VALUE_ONE_CLAMP`].
    pub clamped_ones: usize,
}

/// Maps per-marker p-values to `max(-inv_norm_cdf(p), floor)`, so small
/// p-values become large positive scores.
pub fn zscore_transform(p: &MarkerMatrix, floor: f64) -> Result<ZscoreOutcome> {
    if !floor.is_finite() {
        return Err(Error::Domain(format!("floor must be finite, got {floor}")));
    }
    let m = p.n_cols();
    let mut clamped_ones = 0;
    let mut values = Vec::with_capacity(p.values().len());
    for (idx, &v) in p.values().iter().enumerate() {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::Domain(format!(
                "p-value {v} for sample {} at marker {} is outside (0, 1]",
                p.row_ids()[idx / m],
                p.columns()[idx % m].marker_id
            )));
        }
        let v = if v == 1.0 {
            clamped_ones += 1;
            P_VALUE_ONE_CLAMP
        } else {
            v
        };
        // 0.0 - q rather than -q keeps p = 0.5 at +0.
        let z = 0.0 - inv_norm_cdf(v)?;
        values.push(if z < floor { floor } else { z });
    }
    Ok(ZscoreOutcome {
        matrix: p.with_values(values)?,
        clamped_ones,
    })
}
