//! The cyclic shift test: draw `N` random shift vectors, evaluate the global
//! statistic on each shifted matrix, and report the percentile p-value
//! `max(#{T(sigma^l X) >= t0} / N, 1/N)`.
//!
//! Shift vector `l` is drawn from stream `(seed, SHIFTS, l)` (see
//! [`crate::rng`]), so results do not depend on the number of workers.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{
    default_columns, ColumnAnnotation, GlobalStatistic, LocalStatistic, MarkerMatrix, ShiftWorkspace, TestStatistic,
};
use crate::rng::{self, domain};

pub const DEFAULT_NUM_SHIFTS: usize = 10_000;
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1_000_000;

/// Gains are scored with the maximum column statistic, losses with the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Gain,
    Loss,
}

impl Direction {
    pub fn global(self) -> GlobalStatistic {
        match self {
            Direction::Gain => GlobalStatistic::Max,
            Direction::Loss => GlobalStatistic::Min,
        }
    }

    /// Whether a null value counts against `t0`. Ties count.
    #[inline]
    pub fn exceeds(self, value: f64, t0: f64) -> bool {
        match self {
            Direction::Gain => value >= t0,
            Direction::Loss => value <= t0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Gain => "gain",
            Direction::Loss => "loss",
        }
    }
}

/// How null matrices are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NullScheme {
    #[default]
    CyclicShift,
    /// Independent uniform permutation of each row. Destroys serial
    /// correlation; kept only as a comparison baseline.
    RowPermutation,
}

#[derive(Debug, Clone)]
pub struct TestConfig {
    pub num_shifts: usize,
    pub seed: u64,
    pub direction: Direction,
    pub statistic: LocalStatistic,
    pub store_null: bool,
    pub null_scheme: NullScheme,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            num_shifts: DEFAULT_NUM_SHIFTS,
            seed: 0,
            direction: Direction::Gain,
            statistic: LocalStatistic::Sum,
            store_null: false,
            null_scheme: NullScheme::CyclicShift,
        }
    }
}

impl TestConfig {
    pub fn new(num_shifts: usize, seed: u64) -> Self {
        Self {
            num_shifts,
            seed,
            ..Self::default()
        }
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_statistic(mut self, statistic: LocalStatistic) -> Self {
        self.statistic = statistic;
        self
    }

    pub fn with_store_null(mut self, store: bool) -> Self {
        self.store_null = store;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_shifts == 0 {
            return Err(Error::Config("number of shifts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn test_statistic(&self) -> TestStatistic {
        TestStatistic::new(self.statistic.clone(), self.direction.global())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMode {
    MonteCarlo,
    Exhaustive,
    RowPermutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub t0: f64,
    pub p_value: f64,
    pub exceed_count: u64,
    /// Number of null draws, or `m^n` for exhaustive enumeration.
    pub num_shifts: u64,
    pub seed: u64,
    pub direction: Direction,
    pub statistic: String,
    pub mode: TestMode,
    pub peak_index: usize,
    pub peak: ColumnAnnotation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_values: Option<Vec<f64>>,
}

/// Percentile p-value with the `1/N` floor.
pub fn percentile_p_value(exceed_count: u64, num_shifts: u64) -> f64 {
    let n = num_shifts as f64;
    (exceed_count as f64 / n).max(1.0 / n)
}

/// Runs the test on the current rayon pool.
pub fn cyclic_shift_test(x: &MarkerMatrix, cfg: &TestConfig) -> Result<TestResult> {
    cfg.validate()?;
    let stat = cfg.test_statistic();
    let (t0, peak_index) = stat.evaluate(x);
    let (n, m) = (x.n_rows(), x.n_cols());
    let seed = cfg.seed;

    let null: Vec<f64> = match cfg.null_scheme {
        NullScheme::CyclicShift => (0..cfg.num_shifts as u64)
            .into_par_iter()
            .map_init(
                || (ShiftWorkspace::new(n, m), Vec::with_capacity(n)),
                |(ws, offsets), l| {
                    let mut stream = rng::stream(seed, domain::SHIFTS, l);
                    rng::random_offsets(&mut stream, n, m, offsets);
                    ws.evaluate(x, Some(offsets), &stat).0
                },
            )
            .collect(),
        NullScheme::RowPermutation => (0..cfg.num_shifts as u64)
            .into_par_iter()
            .map(|l| {
                let mut stream = rng::stream(seed, domain::SHIFTS, l);
                let mut values = Vec::with_capacity(n * m);
                for row in x.rows() {
                    let mut r = row.to_vec();
                    r.shuffle(&mut stream);
                    values.extend(r);
                }
                let permuted = MarkerMatrix::from_flat(values, n, m, x.row_ids().to_vec(), default_columns(m))
                    .expect("permutation preserves validity");
                stat.evaluate(&permuted).0
            })
            .collect(),
    };

    let exceed_count = null.iter().filter(|&&v| cfg.direction.exceeds(v, t0)).count() as u64;
    let num_shifts = cfg.num_shifts as u64;
    Ok(TestResult {
        t0,
        p_value: percentile_p_value(exceed_count, num_shifts),
        exceed_count,
        num_shifts,
        seed,
        direction: cfg.direction,
        statistic: cfg.statistic.name().to_string(),
        mode: match cfg.null_scheme {
            NullScheme::CyclicShift => TestMode::MonteCarlo,
            NullScheme::RowPermutation => TestMode::RowPermutation,
        },
        peak_index,
        peak: x.columns()[peak_index].clone(),
        null_values: cfg.store_null.then_some(null),
    })
}

/// Exact `Q_X(T >= t0)` over all `m^n` shift vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveOutcome {
    pub t0: f64,
    pub peak_index: usize,
    pub exceed_count: u64,
    pub total: u64,
}

impl ExhaustiveOutcome {
    pub fn probability(&self) -> f64 {
        self.exceed_count as f64 / self.total as f64
    }
}

/// `m^n`, or `None` on overflow.
pub fn shift_count(n: usize, m: usize) -> Option<u128> {
    (m as u128).checked_pow(u32::try_from(n).ok()?)
}

pub(crate) fn check_budget(required: Option<u128>, budget: u64) -> Result<u64> {
    match required {
        Some(r) if r <= budget as u128 => Ok(r as u64),
        Some(r) => Err(Error::BudgetExceeded { required: r, budget }),
        None => Err(Error::BudgetExceeded {
            required: u128::MAX,
            budget,
        }),
    }
}

/// Decodes `index` into mixed-radix offsets, row 0 most significant.
pub(crate) fn decode_shift(mut index: u64, m: usize, offsets: &mut [usize]) {
    for k in offsets.iter_mut().rev() {
        *k = (index % m as u64) as usize;
        index /= m as u64;
    }
}

/// Enumerates every shift vector. Refused when `m^n` exceeds `budget`.
pub fn exhaustive_test(
    x: &MarkerMatrix,
    direction: Direction,
    statistic: &LocalStatistic,
    budget: u64,
) -> Result<ExhaustiveOutcome> {
    let (n, m) = (x.n_rows(), x.n_cols());
    let total = check_budget(shift_count(n, m), budget)?;
    let stat = TestStatistic::new(statistic.clone(), direction.global());
    let (t0, peak_index) = stat.evaluate(x);
    let exceed_count = (0..total)
        .into_par_iter()
        .map_init(
            || (ShiftWorkspace::new(n, m), vec![0usize; n]),
            |(ws, offsets), idx| {
                decode_shift(idx, m, offsets);
                u64::from(direction.exceeds(ws.evaluate(x, Some(offsets), &stat).0, t0))
            },
        )
        .sum();
    Ok(ExhaustiveOutcome {
        t0,
        peak_index,
        exceed_count,
        total,
    })
}

/// [`exhaustive_test`] packaged as a [`TestResult`]; `p_value` is the exact
/// exceedance probability.
pub fn exhaustive_test_result(
    x: &MarkerMatrix,
    direction: Direction,
    statistic: &LocalStatistic,
    budget: u64,
) -> Result<TestResult> {
    let out = exhaustive_test(x, direction, statistic, budget)?;
    Ok(TestResult {
        t0: out.t0,
        p_value: out.probability(),
        exceed_count: out.exceed_count,
        num_shifts: out.total,
        seed: 0,
        direction,
        statistic: statistic.name().to_string(),
        mode: TestMode::Exhaustive,
        peak_index: out.peak_index,
        peak: x.columns()[out.peak_index].clone(),
        null_values: None,
    })
}
