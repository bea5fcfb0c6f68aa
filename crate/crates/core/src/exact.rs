//! Exact and Monte Carlo versions of the two conditional distributions of
//! `T` over the cyclic shifts of a matrix:
//!
//! * `Q`: every shift vector `r` in `[m]^n` equally likely;
//! * `P`: shift vector `r` weighted by `prod_i w_i[r_i]`, where `w_i` is row
//!   `i`'s likelihood under the null model normalized over its `m` shifts.
//!
//! `T` is unchanged by constant shifts, so both are computed over orbit
//! representatives `r_0 = 0`. That needs `m^{n-1}` evaluations of `T`; the
//! orbit of `r` carries `P` weight `sum_k prod_i w_i[(r_i + k) mod m]`.
//! Also here: minimal periods, fullness, and the convergence experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{check_budget, decode_shift, shift_count, DEFAULT_ENUMERATION_BUDGET};
use crate::error::{Error, Result};
use crate::matrix::{MarkerMatrix, ShiftWorkspace, TestStatistic};
use crate::null_models::{log_sum_exp, normalized_shift_log_weights, NullModel, NullModelSpec};
use crate::rng::{self, domain};

/// Least `k >= 1` with `sigma_k(row) == row`. Always divides `row.len()`.
pub fn minimal_period(row: &[f64]) -> usize {
    let m = row.len();
    (1..=m)
        .filter(|k| m % k == 0)
        .find(|&k| (0..m).all(|j| row[(j + k) % m] == row[j]))
        .unwrap_or(m)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fullness {
    pub full: bool,
    pub periods: Vec<usize>,
}

/// Whether all `m^n` cyclic shifts of `x` are distinct matrices.
pub fn is_full(x: &MarkerMatrix) -> Fullness {
    let periods: Vec<usize> = x.rows().map(minimal_period).collect();
    Fullness {
        full: periods.iter().all(|&p| p == x.n_cols()),
        periods,
    }
}

/// Two disjoint, equal blocks `row[first..first+length]` and
/// `row[second..second+length]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockWitness {
    pub first: usize,
    pub second: usize,
    pub length: usize,
}

/// For a row with a proper period, returns two adjacent disjoint copies of
/// the longest whole-period prefix that fits twice; its length is at least
/// `m / 3`. `None` when every shift of the row is distinct.
pub fn repeated_block_witness(row: &[f64]) -> Option<BlockWitness> {
    let m = row.len();
    let p = minimal_period(row);
    if p == m {
        return None;
    }
    let length = p * ((m / p) / 2);
    Some(BlockWitness {
        first: 0,
        second: length,
        length,
    })
}

/// A finitely supported distribution of `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatDistribution {
    pub support: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl StatDistribution {
    /// Merges equal values and normalizes. Weights must be non-negative with
    /// a positive total.
    pub fn from_weighted(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::DegenerateSupport("no points".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = points.iter().map(|p| p.1).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::DegenerateSupport(format!("total weight {total}")));
        }
        let mut support: Vec<f64> = Vec::new();
        let mut probabilities: Vec<f64> = Vec::new();
        for (t, w) in points {
            match support.last() {
                Some(&last) if last == t => *probabilities.last_mut().unwrap() += w / total,
                _ => {
                    support.push(t);
                    probabilities.push(w / total);
                }
            }
        }
        Ok(Self { support, probabilities })
    }

    pub fn point_mass(t: f64) -> Self {
        Self {
            support: vec![t],
            probabilities: vec![1.0],
        }
    }

    /// `P(T <= t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        let k = self.support.partition_point(|&s| s <= t);
        self.probabilities[..k].iter().sum::<f64>().min(1.0)
    }

    /// `P(T >= t)`.
    pub fn upper_tail(&self, t: f64) -> f64 {
        let k = self.support.partition_point(|&s| s < t);
        self.probabilities[k..].iter().sum::<f64>().min(1.0)
    }

    pub fn probability_of(&self, t: f64) -> f64 {
        self.support
            .iter()
            .position(|&s| s == t)
            .map_or(0.0, |k| self.probabilities[k])
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMeta {
    pub n: usize,
    pub m: usize,
    pub spec: String,
    pub seed: u64,
    pub replicate: usize,
    pub method: Method,
    pub full: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_samples: Option<u64>,
}

/// CDFs of `T` under `P` and `Q` on their merged support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionComparison {
    pub meta: ComparisonMeta,
    pub grid: Vec<f64>,
    pub cdf_p: Vec<f64>,
    pub cdf_q: Vec<f64>,
    pub sup_distance: f64,
}

impl DistributionComparison {
    pub fn new(p: &StatDistribution, q: &StatDistribution, meta: ComparisonMeta) -> Self {
        let mut grid: Vec<f64> = p.support.iter().chain(&q.support).copied().collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let cdf_p = running_cdf(&grid, p);
        let cdf_q = running_cdf(&grid, q);
        let sup_distance = cdf_p
            .iter()
            .zip(&cdf_q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Self {
            meta,
            grid,
            cdf_p,
            cdf_q,
            sup_distance,
        }
    }
}

fn running_cdf(grid: &[f64], d: &StatDistribution) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len());
    let mut k = 0;
    let mut acc = 0.0;
    for &t in grid {
        while k < d.support.len() && d.support[k] <= t {
            acc += d.probabilities[k];
            k += 1;
        }
        out.push(if k == d.support.len() { 1.0 } else { acc.min(1.0) });
    }
    out
}

/// Row weights `log w_i[s]` for every row.
pub fn shift_log_weights(x: &MarkerMatrix, model: &dyn NullModel) -> Result<Vec<Vec<f64>>> {
    x.rows()
        .enumerate()
        .map(|(i, row)| {
            normalized_shift_log_weights(row, model).map_err(|e| match e {
                Error::DegenerateSupport(msg) => Error::DegenerateSupport(format!("row {}: {msg}", x.row_ids()[i])),
                other => other,
            })
        })
        .collect()
}

/// Evaluates `log sum_k prod_i w_i[(r_i + k) mod m]` for shift vectors `r`.
struct OrbitWeigher {
    /// Row weights rescaled so each row's largest entry is 1.
    scaled: Vec<Vec<f64>>,
    log_scale: f64,
    log_weights: Vec<Vec<f64>>,
    terms: Vec<f64>,
}

impl OrbitWeigher {
    fn new(log_weights: Vec<Vec<f64>>) -> Self {
        let mut log_scale = 0.0;
        let scaled = log_weights
            .iter()
            .map(|lw| {
                let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                log_scale += max;
                lw.iter().map(|v| (v - max).exp()).collect()
            })
            .collect();
        let m = log_weights[0].len();
        Self {
            scaled,
            log_scale,
            log_weights,
            terms: Vec::with_capacity(m),
        }
    }

    fn log_orbit_weight(&mut self, offsets: &[usize]) -> f64 {
        let m = self.scaled[0].len();
        let mut total = 0.0;
        for k in 0..m {
            let mut prod = 1.0;
            for (w, &r) in self.scaled.iter().zip(offsets) {
                let idx = r + k;
                prod *= w[if idx >= m { idx - m } else { idx }];
            }
            total += prod;
        }
        if total > f64::MIN_POSITIVE {
            return total.ln() + self.log_scale;
        }
        // Underflow in the scaled products; redo in log space.
        self.terms.clear();
        for k in 0..m {
            let mut s = 0.0;
            for (lw, &r) in self.log_weights.iter().zip(offsets) {
                s += lw[(r + k) % m];
            }
            self.terms.push(s);
        }
        log_sum_exp(&self.terms)
    }
}

/// Number of `T` evaluations needed for exact enumeration of `x`.
pub fn orbit_count(n: usize, m: usize) -> Option<u128> {
    shift_count(n.saturating_sub(1), m)
}

fn enumerate_orbits(
    x: &MarkerMatrix,
    stat: &TestStatistic,
    log_weights: Option<Vec<Vec<f64>>>,
    budget: u64,
) -> Result<Vec<(f64, f64)>> {
    let (n, m) = (x.n_rows(), x.n_cols());
    let total = check_budget(orbit_count(n, m), budget)?;
    Ok((0..total)
        .into_par_iter()
        .map_init(
            || {
                (
                    ShiftWorkspace::new(n, m),
                    vec![0usize; n],
                    log_weights.clone().map(OrbitWeigher::new),
                )
            },
            |(ws, offsets, weigher), idx| {
                decode_shift(idx, m, &mut offsets[1..]);
                let t = ws.evaluate(x, Some(offsets), stat).0;
                let lw = weigher.as_mut().map_or(0.0, |w| w.log_orbit_weight(offsets));
                (t, lw)
            },
        )
        .collect())
}

fn from_log_weighted(points: Vec<(f64, f64)>) -> Result<StatDistribution> {
    let logs: Vec<f64> = points.iter().map(|p| p.1).collect();
    let norm = log_sum_exp(&logs);
    if norm == f64::NEG_INFINITY {
        return Err(Error::DegenerateSupport("every shift vector has zero weight".into()));
    }
    StatDistribution::from_weighted(points.into_iter().map(|(t, l)| (t, (l - norm).exp())).collect())
}

/// Exact `Q`: uniform over all `m^n` shift vectors.
pub fn exact_cyclic_dist(x: &MarkerMatrix, stat: &TestStatistic, budget: u64) -> Result<StatDistribution> {
    let points = enumerate_orbits(x, stat, None, budget)?;
    StatDistribution::from_weighted(points.into_iter().map(|(t, _)| (t, 1.0)).collect())
}

/// Exact `P`: shift vectors weighted by the product of per-row likelihood
/// weights. Equals the true conditional law of `T` when `x` is full.
pub fn exact_conditional_dist(
    x: &MarkerMatrix,
    model: &dyn NullModel,
    stat: &TestStatistic,
    budget: u64,
) -> Result<StatDistribution> {
    let lw = shift_log_weights(x, model)?;
    from_log_weighted(enumerate_orbits(x, stat, Some(lw), budget)?)
}

/// Both exact distributions from a single enumeration, as `(P, Q)`.
pub fn exact_distributions(
    x: &MarkerMatrix,
    model: &dyn NullModel,
    stat: &TestStatistic,
    budget: u64,
) -> Result<(StatDistribution, StatDistribution)> {
    let lw = shift_log_weights(x, model)?;
    let points = enumerate_orbits(x, stat, Some(lw), budget)?;
    let q = StatDistribution::from_weighted(points.iter().map(|&(t, _)| (t, 1.0)).collect())?;
    Ok((from_log_weighted(points)?, q))
}

/// Sampled `(P, Q)`. Shift vectors are drawn uniformly; `Q` is their ECDF
/// and `P` the same draws with self-normalized weights. Each draw carries
/// the exact weight of its constant-shift orbit, on which `T` is constant.
pub fn monte_carlo_distributions(
    x: &MarkerMatrix,
    model: &dyn NullModel,
    stat: &TestStatistic,
    num_samples: usize,
    seed: u64,
) -> Result<(StatDistribution, StatDistribution)> {
    if num_samples == 0 {
        return Err(Error::Config("need at least one Monte Carlo sample".into()));
    }
    let lw = shift_log_weights(x, model)?;
    let (n, m) = (x.n_rows(), x.n_cols());
    let points: Vec<(f64, f64)> = (0..num_samples as u64)
        .into_par_iter()
        .map_init(
            || (ShiftWorkspace::new(n, m), Vec::with_capacity(n), OrbitWeigher::new(lw.clone())),
            |(ws, offsets, weigher), l| {
                let mut stream = rng::stream(seed, domain::MONTE_CARLO_SHIFTS, l);
                rng::random_offsets(&mut stream, n, m, offsets);
                let t = ws.evaluate(x, Some(offsets), stat).0;
                (t, weigher.log_orbit_weight(offsets))
            },
        )
        .collect();
    let q = StatDistribution::from_weighted(points.iter().map(|&(t, _)| (t, 1.0)).collect())?;
    Ok((from_log_weighted(points)?, q))
}

fn meta(x: &MarkerMatrix, spec: &NullModelSpec, method: Method, seed: u64, num_samples: Option<u64>) -> ComparisonMeta {
    ComparisonMeta {
        n: x.n_rows(),
        m: x.n_cols(),
        spec: spec.describe(),
        seed,
        replicate: 0,
        method,
        full: is_full(x).full,
        num_samples,
    }
}

pub fn exact_comparison(
    x: &MarkerMatrix,
    spec: &NullModelSpec,
    stat: &TestStatistic,
    budget: u64,
) -> Result<DistributionComparison> {
    let (p, q) = exact_distributions(x, spec, stat, budget)?;
    Ok(DistributionComparison::new(&p, &q, meta(x, spec, Method::Exact, 0, None)))
}

pub fn monte_carlo_dists(
    x: &MarkerMatrix,
    spec: &NullModelSpec,
    stat: &TestStatistic,
    num_samples: usize,
    seed: u64,
) -> Result<DistributionComparison> {
    let (p, q) = monte_carlo_distributions(x, spec, stat, num_samples, seed)?;
    Ok(DistributionComparison::new(
        &p,
        &q,
        meta(x, spec, Method::MonteCarlo, seed, Some(num_samples as u64)),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    /// Exact when the enumeration fits the budget, otherwise Monte Carlo.
    #[default]
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m_values: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub method: MethodChoice,
    pub num_samples: usize,
    pub budget: u64,
    pub statistic: TestStatistic,
}

impl ExperimentConfig {
    pub fn new(n: usize, m_values: Vec<usize>, replicates: usize, seed: u64) -> Self {
        Self {
            n,
            m_values,
            replicates,
            seed,
            method: MethodChoice::Auto,
            num_samples: 10_000,
            budget: DEFAULT_ENUMERATION_BUDGET,
            statistic: TestStatistic::max_sum(),
        }
    }
}

/// Seed of the matrix simulated for replicate `rep` at row length `m`.
pub fn replicate_seed(seed: u64, m: usize, rep: usize) -> u64 {
    rng::derive_seed(seed, domain::EXPERIMENT, ((m as u64) << 32) | rep as u64)
}

/// Simulates replicate matrices from `spec` for each `m` and compares
/// `P` with `Q` on each. Output is ordered by `m`, then replicate.
pub fn convergence_experiment(spec: &NullModelSpec, cfg: &ExperimentConfig) -> Result<Vec<DistributionComparison>> {
    spec.check()?;
    if cfg.replicates == 0 || cfg.m_values.is_empty() {
        return Err(Error::Config("need at least one m value and one replicate".into()));
    }
    let jobs: Vec<(usize, usize)> = cfg
        .m_values
        .iter()
        .flat_map(|&m| (0..cfg.replicates).map(move |r| (m, r)))
        .collect();
    jobs.into_par_iter()
        .map(|(m, rep)| {
            let x_seed = replicate_seed(cfg.seed, m, rep);
            let x = spec.simulate(cfg.n, m, x_seed)?;
            let exact = match cfg.method {
                MethodChoice::Exact => true,
                MethodChoice::MonteCarlo => false,
                MethodChoice::Auto => orbit_count(cfg.n, m).is_some_and(|c| c <= cfg.budget as u128),
            };
            let mut cmp = if exact {
                exact_comparison(&x, spec, &cfg.statistic, cfg.budget)?
            } else {
                let mc_seed = rng::derive_seed(x_seed, domain::MONTE_CARLO_SHIFTS, 0);
                monte_carlo_dists(&x, spec, &cfg.statistic, cfg.num_samples, mc_seed)?
            };
            cmp.meta.seed = x_seed;
            cmp.meta.replicate = rep;
            Ok(cmp)
        })
        .collect()
}

/// Median `sup_distance` over the comparisons with row length `m`.
pub fn median_sup_distance(results: &[DistributionComparison], m: usize) -> Option<f64> {
    let d: Vec<f64> = results
        .iter()
        .filter(|c| c.meta.m == m)
        .map(|c| c.sup_distance)
        .collect();
    crate::io::median(d)
}
