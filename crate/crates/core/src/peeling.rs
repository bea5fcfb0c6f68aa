//! Peeling: flatten a discovered peak and test again for further peaks.
//!
//! The default rule is excess redistribution. With column sums `s_j` and
//! baseline `b` (a quantile of the sums), the region is the maximal run of
//! columns around the peak, on the peak's chromosome, where `s_j > b` (gain)
//! or `s_j < b` (loss). Each sample then gives up `c_i * (s_j - b)` in every
//! region column, where `c_i = (x[i][peak] - b/n) / (s_peak - b)`. The
//! shares sum to one, so region sums land on `b` and nothing outside the
//! region moves.

use serde::{Deserialize, Serialize};

use crate::engine::{cyclic_shift_test, Direction, TestConfig, TestResult};
use crate::error::{Error, Result};
use crate::matrix::{column_stats, ColumnAnnotation, LocalStatistic, MarkerMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeelConfig {
    pub alpha: f64,
    pub max_iterations: usize,
    pub baseline_quantile: f64,
}

impl Default for PeelConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            max_iterations: 5,
            baseline_quantile: 0.5,
        }
    }
}

impl PeelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.baseline_quantile) {
            return Err(Error::Config(format!(
                "baseline quantile must lie in [0, 1], got {}",
                self.baseline_quantile
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PeelOutcome {
    pub matrix: MarkerMatrix,
    /// Inclusive column range that was flattened. `None` when the peak does
    /// not clear the baseline and the matrix is returned unchanged.
    pub region: Option<(usize, usize)>,
}

/// A procedure that removes a peak's contribution from a matrix.
pub trait PeelRule: Send + Sync {
    fn name(&self) -> &str;
    fn peel(&self, x: &MarkerMatrix, peak_index: usize, direction: Direction) -> Result<PeelOutcome>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessRedistribution {
    pub baseline_quantile: f64,
}

impl Default for ExcessRedistribution {
    fn default() -> Self {
        Self { baseline_quantile: 0.5 }
    }
}

impl PeelRule for ExcessRedistribution {
    fn name(&self) -> &str {
        "excess-redistribution"
    }

    fn peel(&self, x: &MarkerMatrix, peak_index: usize, direction: Direction) -> Result<PeelOutcome> {
        peel_once(x, peak_index, direction, self.baseline_quantile)
    }
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Dimension("quantile of an empty set".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Range(format!("quantile level {q} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = q * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Finds the region around the peak that sits strictly beyond the baseline.
pub fn peel_region(
    sums: &[f64],
    columns: &[ColumnAnnotation],
    peak_index: usize,
    direction: Direction,
    baseline: f64,
) -> Option<(usize, usize)> {
    let chrom = &columns[peak_index].chromosome;
    let inside = |j: usize| {
        columns[j].chromosome == *chrom
            && match direction {
                Direction::Gain => sums[j] > baseline,
                Direction::Loss => sums[j] < baseline,
            }
    };
    if !inside(peak_index) {
        return None;
    }
    let mut left = peak_index;
    while left > 0 && inside(left - 1) {
        left -= 1;
    }
    let mut right = peak_index;
    while right + 1 < sums.len() && inside(right + 1) {
        right += 1;
    }
    Some((left, right))
}

/// Applies the excess-redistribution rule once.
pub fn peel_once(x: &MarkerMatrix, peak_index: usize, direction: Direction, q: f64) -> Result<PeelOutcome> {
    let (n, m) = (x.n_rows(), x.n_cols());
    if peak_index >= m {
        return Err(Error::Range(format!("peak index {peak_index} out of range for {m} columns")));
    }
    let sums = column_stats(x, &LocalStatistic::Sum);
    let baseline = quantile(&sums, q)?;
    let Some((left, right)) = peel_region(&sums, x.columns(), peak_index, direction, baseline) else {
        return Ok(PeelOutcome {
            matrix: x.clone(),
            region: None,
        });
    };
    let peak_excess = sums[peak_index] - baseline;
    let per_sample = baseline / n as f64;
    let mut values = x.values().to_vec();
    for i in 0..n {
        let c = (x.get(i, peak_index) - per_sample) / peak_excess;
        for j in left..=right {
            values[i * m + j] -= c * (sums[j] - baseline);
        }
    }
    Ok(PeelOutcome {
        matrix: x.with_values(values)?,
        region: Some((left, right)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeelFinding {
    pub iteration: usize,
    pub peak_index: usize,
    pub peak: ColumnAnnotation,
    pub t0: f64,
    pub p_value: f64,
    pub exceed_count: u64,
    pub num_shifts: u64,
    pub seed: u64,
    /// Inclusive `[left, right]` column range peeled after this finding.
    #[serde(default)]
    pub region: Option<[usize; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    NotSignificant,
    MaxIterations,
    /// The peak did not clear the baseline, so nothing could be peeled.
    EmptyRegion,
}

#[derive(Debug, Clone)]
pub struct PeelReport {
    pub findings: Vec<PeelFinding>,
    pub stop: StopReason,
    pub rule: String,
    /// Matrix after the last peel.
    pub residual: MarkerMatrix,
}

impl PeelReport {
    /// Findings whose p-value cleared `alpha`.
    pub fn discoveries(&self, alpha: f64) -> impl Iterator<Item = &PeelFinding> {
        self.findings.iter().filter(move |f| f.p_value <= alpha)
    }
}

pub fn iterative_detection(x: &MarkerMatrix, test: &TestConfig, peel: &PeelConfig) -> Result<PeelReport> {
    let rule = ExcessRedistribution {
        baseline_quantile: peel.baseline_quantile,
    };
    iterative_detection_with(x, test, peel, &rule)
}

/// Test, record, peel, repeat. Iteration `k` uses seed `seed ^ k`.
pub fn iterative_detection_with(
    x: &MarkerMatrix,
    test: &TestConfig,
    peel: &PeelConfig,
    rule: &dyn PeelRule,
) -> Result<PeelReport> {
    test.validate()?;
    peel.validate()?;
    let mut current = x.clone();
    let mut findings = Vec::new();
    let mut iteration = 0usize;
    let stop = loop {
        let cfg = TestConfig {
            seed: test.seed ^ iteration as u64,
            store_null: false,
            ..test.clone()
        };
        let result: TestResult = cyclic_shift_test(&current, &cfg)?;
        let mut finding = PeelFinding {
            iteration,
            peak_index: result.peak_index,
            peak: result.peak,
            t0: result.t0,
            p_value: result.p_value,
            exceed_count: result.exceed_count,
            num_shifts: result.num_shifts,
            seed: result.seed,
            region: None,
        };
        if result.p_value > peel.alpha {
            findings.push(finding);
            break StopReason::NotSignificant;
        }
        if iteration + 1 >= peel.max_iterations {
            findings.push(finding);
            break StopReason::MaxIterations;
        }
        let outcome = rule.peel(&current, result.peak_index, test.direction)?;
        let Some((l, r)) = outcome.region else {
            findings.push(finding);
            break StopReason::EmptyRegion;
        };
        finding.region = Some([l, r]);
        findings.push(finding);
        current = outcome.matrix;
        iteration += 1;
    };
    Ok(PeelReport {
        findings,
        stop,
        rule: rule.name().to_string(),
        residual: current,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::null_models::Ar1Spec;

    fn noise(n: usize, m: usize, seed: u64) -> MarkerMatrix {
        Ar1Spec::new(0.0, 1.0, 0.0).unwrap().simulate(n, m, seed).unwrap()
    }

    fn spiked(x: &MarkerMatrix, cols: &[(usize, f64)]) -> MarkerMatrix {
        let m = x.n_cols();
        let mut v = x.values().to_vec();
        for i in 0..x.n_rows() {
            for &(j, h) in cols {
                v[i * m + j] += h;
            }
        }
        x.with_values(v).unwrap()
    }

    #[test]
    fn quantile_type7() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5).unwrap(), 2.0);
        assert_eq!(quantile(&[4.0, 1.0, 3.0, 2.0], 0.5).unwrap(), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25).unwrap(), 2.0);
        assert_eq!(quantile(&[0.0, 10.0], 0.3).unwrap(), 3.0);
        assert!(quantile(&[], 0.5).is_err());
    }

    #[test]
    fn spike_is_flattened_to_median() {
        let x = spiked(&noise(8, 41, 3), &[(20, 5.0)]);
        let sums = column_stats(&x, &LocalStatistic::Sum);
        let mut sorted = sums.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[20];
        let out = peel_once(&x, 20, Direction::Gain, 0.5).unwrap();
        let (l, r) = out.region.unwrap();
        assert!(l <= 20 && 20 <= r);
        let after = column_stats(&out.matrix, &LocalStatistic::Sum);
        for j in 0..41 {
            if (l..=r).contains(&j) {
                assert!((after[j] - median).abs() < 1e-9, "column {j}");
            } else {
                for i in 0..8 {
                    assert_eq!(out.matrix.get(i, j).to_bits(), x.get(i, j).to_bits());
                }
            }
        }
        assert!((after[20] - median).abs() < 1e-9);
    }

    #[test]
    fn region_grows_only_through_exceeding_columns() {
        // sums: 0 5 6 0 7 (m = 5, n = 1) with median 5: only column 2 exceeds.
        let x = MarkerMatrix::from_rows(vec![vec![0.0, 5.0, 6.0, 0.0, 7.0]]).unwrap();
        let out = peel_once(&x, 2, Direction::Gain, 0.5).unwrap();
        assert_eq!(out.region, Some((2, 2)));
        assert_eq!(out.matrix.row(0), &[0.0, 5.0, 5.0, 0.0, 7.0]);
    }

    #[test]
    fn region_respects_chromosome() {
        let cols = vec![
            ColumnAnnotation::genomic("a", "1", 1),
            ColumnAnnotation::genomic("b", "1", 2),
            ColumnAnnotation::genomic("c", "2", 1),
            ColumnAnnotation::genomic("d", "2", 2),
            ColumnAnnotation::genomic("e", "2", 3),
        ];
        let sums = [0.0, 9.0, 8.0, 0.0, 0.0];
        assert_eq!(peel_region(&sums, &cols, 1, Direction::Gain, 0.0), Some((1, 1)));
        assert_eq!(peel_region(&sums, &cols, 2, Direction::Gain, 0.0), Some((2, 2)));
        let loss = [0.0, -9.0, -8.0, 0.0, 0.0];
        assert_eq!(peel_region(&loss, &cols, 1, Direction::Loss, 0.0), Some((1, 1)));
    }

    #[test]
    fn loss_direction_lifts_trough() {
        let x = spiked(&noise(6, 31, 5), &[(10, -4.0)]);
        let out = peel_once(&x, 10, Direction::Loss, 0.5).unwrap();
        let b = quantile(&column_stats(&x, &LocalStatistic::Sum), 0.5).unwrap();
        let after = column_stats(&out.matrix, &LocalStatistic::Sum);
        assert!((after[10] - b).abs() < 1e-9);
    }

    #[test]
    fn constant_matrix_is_untouched() {
        let x = MarkerMatrix::from_rows(vec![vec![1.0; 6], vec![1.0; 6]]).unwrap();
        let out = peel_once(&x, 3, Direction::Gain, 0.5).unwrap();
        assert!(out.region.is_none());
        assert_eq!(out.matrix, x);
        assert!(peel_once(&x, 6, Direction::Gain, 0.5).is_err());
    }

    #[test]
    fn retest_after_peel_drops_t0() {
        let x = spiked(&noise(5, 60, 9), &[(33, 3.0)]);
        let stat = crate::matrix::TestStatistic::max_sum();
        let (t0, peak) = stat.evaluate(&x);
        let out = peel_once(&x, peak, Direction::Gain, 0.5).unwrap();
        assert!(stat.evaluate(&out.matrix).0 < t0);
    }

    #[test]
    fn two_spikes_found_in_magnitude_order() {
        let x = spiked(&noise(10, 200, 11), &[(50, 3.0), (150, 1.8)]);
        let cfg = TestConfig::new(2000, 7);
        let report = iterative_detection(&x, &cfg, &PeelConfig::default()).unwrap();
        assert!(report.findings.len() >= 2);
        assert_eq!(report.findings[0].peak_index, 50);
        assert_eq!(report.findings[1].peak_index, 150);
        assert_eq!(report.findings[0].seed, 7);
        assert_eq!(report.findings[1].seed, 7 ^ 1);
        let [l, r] = report.findings[0].region.unwrap();
        assert!(l <= 50 && 50 <= r);
    }

    #[test]
    fn iteration_cap() {
        let x = spiked(&noise(10, 100, 13), &[(20, 4.0), (70, 4.0)]);
        let peel = PeelConfig {
            max_iterations: 1,
            ..PeelConfig::default()
        };
        let report = iterative_detection(&x, &TestConfig::new(500, 1), &peel).unwrap();
        assert_eq!(report.findings.len(), 1);
        assert_eq!(report.stop, StopReason::MaxIterations);
        assert!(report.findings[0].region.is_none());
    }

    #[test]
    fn null_matrix_usually_stops_at_once() {
        let x = noise(6, 80, 17);
        let report = iterative_detection(&x, &TestConfig::new(500, 2), &PeelConfig::default()).unwrap();
        assert!(report.findings.len() <= 5);
        if report.findings.len() == 1 {
            assert_eq!(report.stop, StopReason::NotSignificant);
        }
    }

    #[test]
    fn config_validation() {
        for alpha in [0.0, 1.0, f64::NAN] {
            let c = PeelConfig {
                alpha,
                ..PeelConfig::default()
            };
            assert!(c.validate().is_err());
        }
        let c = PeelConfig {
            max_iterations: 0,
            ..PeelConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
