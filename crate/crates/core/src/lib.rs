//! Cyclic shift permutation testing for recurrent aberrations in marker
//! matrices (samples as rows, genomic markers as columns).
//!
//! Each row of the observed matrix is rotated by an independent random
//! offset, which keeps the serial dependence within a row while breaking any
//! alignment between rows. The max (or min) column statistic of the observed
//! matrix is compared against its values on the rotated copies.
//!
//! ```
//! use cyclic_shift::{cyclic_shift_test, MarkerMatrix, TestConfig};
//!
//! let x = MarkerMatrix::from_rows(vec![
//!     vec![0.1, 2.0, -0.3, 0.2, 0.0],
//!     vec![-0.2, 1.8, 0.1, 0.0, 0.3],
//!     vec![0.0, 2.2, 0.2, -0.1, -0.4],
//! ])
//! .unwrap();
//! let result = cyclic_shift_test(&x, &TestConfig::new(1000, 42)).unwrap();
//! assert_eq!(result.peak_index, 1);
//! assert!(result.p_value < 0.1);
//! ```

pub mod engine;
pub mod error;
pub mod exact;
pub mod io;
pub mod matrix;
pub mod null_models;
pub mod peeling;
pub mod rng;
pub mod special;

pub use engine::{
    cyclic_shift_test, exhaustive_test, exhaustive_test_result, percentile_p_value, shift_count, Direction,
    ExhaustiveOutcome, NullScheme, TestConfig, TestMode, TestResult, DEFAULT_ENUMERATION_BUDGET, DEFAULT_NUM_SHIFTS,
};
pub use error::{Error, Result};
pub use exact::{
    convergence_experiment, exact_comparison, exact_conditional_dist, exact_cyclic_dist, exact_distributions,
    is_full, minimal_period, monte_carlo_distributions, monte_carlo_dists, repeated_block_witness,
    DistributionComparison, ExperimentConfig, MethodChoice, StatDistribution,
};
pub use matrix::{
    apply_shift, column_stats, cyclic_shift_row, global_stat, ColumnAnnotation, CustomStatistic, GlobalStatistic,
    LocalStatistic, MarkerMatrix, ShiftVector, TestStatistic,
};
pub use null_models::{Ar1Spec, MarkovChainSpec, NullModel, NullModelSpec};
pub use peeling::{iterative_detection, peel_once, PeelConfig, PeelReport};
