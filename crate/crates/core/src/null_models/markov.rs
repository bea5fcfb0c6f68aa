use std::collections::VecDeque;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{default_columns, default_row_ids, MarkerMatrix};
use crate::rng::{self, domain};

const ROW_SUM_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;

/// A stationary first-order chain on a finite alphabet of real values.
///
/// `transition[v][u]` is `p(u | v)`: row `v` is the current state, column
/// `u` the next one. The joint law of a consecutive pair is oriented as
/// `p2(v, u) = P(X_{j-1} = v, X_j = u) = p1(v) p(u | v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovChainSpec {
    states: Vec<f64>,
    transition: Vec<Vec<f64>>,
    stationary: Vec<f64>,
}

impl MarkovChainSpec {
    /// Validates the transition matrix, requires an ergodic chain and
    /// solves for its stationary distribution.
    pub fn new(states: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        validate_states(&states, transition.len())?;
        let stationary = stationary_distribution(&transition)?;
        Ok(Self {
            states,
            transition,
            stationary,
        })
    }

    /// A chain whose rows all equal `p`, i.e. i.i.d. draws from `p`.
    pub fn iid(states: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        let r = p.len();
        Self::new(states, vec![p; r])
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, x: f64) -> Result<usize> {
        self.states
            .iter()
            .position(|&s| s == x)
            .ok_or_else(|| Error::Domain(format!("value {x} is not a state of the chain")))
    }

    /// `p2(v, u) = p1(v) p(u | v)`.
    pub fn pair_probability(&self, v: usize, u: usize) -> f64 {
        self.stationary[v] * self.transition[v][u]
    }

    pub fn check_conditions(&self) -> ConditionReport {
        let (irreducible, period) = ergodicity(&self.transition);
        let mut report = base_report(&self.transition, irreducible, period);
        let r = self.n_states();
        for u in 0..r {
            for v in 0..r {
                let marginal = self.stationary[u] * self.stationary[v];
                if self.pair_probability(v, u) == 0.0 && marginal > 0.0 {
                    report.zero_pair_violations.push((u, v));
                }
            }
        }
        report
    }

    /// Simulates `n` independent rows of length `m`. Refuses chains that
    /// fail [`check_conditions`](Self::check_conditions).
    pub fn simulate(&self, n: usize, m: usize, seed: u64) -> Result<MarkerMatrix> {
        let report = self.check_conditions();
        if !report.passes() {
            return Err(Error::Conditions(Box::new(report)));
        }
        let initial = cumulative(&self.stationary);
        let steps: Vec<Vec<f64>> = self.transition.iter().map(|row| cumulative(row)).collect();
        let values: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut rng = rng::stream(seed, domain::MARKOV_ROWS, i as u64);
                let mut state = draw(&initial, rng::open_unit(&mut rng));
                let mut row = Vec::with_capacity(m);
                for j in 0..m {
                    if j > 0 {
                        state = draw(&steps[state], rng::open_unit(&mut rng));
                    }
                    row.push(self.states[state]);
                }
                row
            })
            .collect();
        MarkerMatrix::from_flat(values, n, m, default_row_ids(n), default_columns(m))
    }
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Inverse-CDF categorical draw; the last category absorbs rounding slack.
fn draw(cum: &[f64], u: f64) -> usize {
    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
}

fn validate_states(states: &[f64], r: usize) -> Result<()> {
    if states.len() != r {
        return Err(Error::Config(format!(
            "{} states for a {r} x {r} transition matrix",
            states.len()
        )));
    }
    for (i, s) in states.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::Config(format!("state {i} is not finite")));
        }
        if states[..i].contains(s) {
            return Err(Error::Config(format!("state value {s} is repeated")));
        }
    }
    Ok(())
}

/// Square, non-negative, rows summing to one within 1e-12.
pub fn validate_transition(transition: &[Vec<f64>]) -> Result<()> {
    let r = transition.len();
    if r == 0 {
        return Err(Error::Config("empty transition matrix".into()));
    }
    for (v, row) in transition.iter().enumerate() {
        if row.len() != r {
            return Err(Error::Config(format!("transition row {v} has {} entries, expected {r}", row.len())));
        }
        if let Some(u) = row.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config(format!("transition entry ({v}, {u}) = {} is not a probability", row[u])));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::Config(format!("transition row {v} sums to {sum}")));
        }
    }
    Ok(())
}

fn reachable(transition: &[Vec<f64>], start: usize, reverse: bool) -> Vec<Option<usize>> {
    let r = transition.len();
    let mut level = vec![None; r];
    level[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(a) = queue.pop_front() {
        for b in 0..r {
            let p = if reverse { transition[b][a] } else { transition[a][b] };
            if p > 0.0 && level[b].is_none() {
                level[b] = Some(level[a].unwrap() + 1);
                queue.push_back(b);
            }
        }
    }
    level
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `(irreducible, period)`. Irreducibility is mutual reachability with
/// state 0; the period is the gcd of `level(a) + 1 - level(b)` over edges
/// `a -> b` of the breadth-first levels from state 0, which equals the gcd
/// of the cycle lengths through state 0.
pub fn ergodicity(transition: &[Vec<f64>]) -> (bool, usize) {
    let forward = reachable(transition, 0, false);
    let backward = reachable(transition, 0, true);
    let irreducible = forward.iter().all(Option::is_some) && backward.iter().all(Option::is_some);
    let r = transition.len();
    let mut period = 0;
    for a in 0..r {
        for b in 0..r {
            if transition[a][b] > 0.0 {
                if let (Some(la), Some(lb)) = (forward[a], forward[b]) {
                    period = gcd(period, (la + 1).abs_diff(lb));
                }
            }
        }
    }
    (irreducible, period)
}

/// Solves `p1 M = p1`, `sum p1 = 1` for an ergodic chain.
pub fn stationary_distribution(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    validate_transition(transition)?;
    let r = transition.len();
    let (irreducible, period) = ergodicity(transition);
    if !irreducible {
        let mut msg = "transition matrix is reducible".to_string();
        if transition.iter().flatten().any(|&p| p == 1.0) {
            msg.push_str("; it also has a deterministic transition (p(u|v) = 1)");
        }
        return Err(Error::NotErgodic(msg));
    }
    if period != 1 {
        return Err(Error::NotErgodic(format!("chain is periodic with period {period}")));
    }
    // (M^T - I) p = 0 with the last equation replaced by sum(p) = 1.
    let mut a = DMatrix::<f64>::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            a[(i, j)] = transition[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..r {
        a[(r - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(r);
    rhs[r - 1] = 1.0;
    let solution = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NotErgodic("stationary system is singular".into()))?;
    let mut p: Vec<f64> = solution.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    let residual = stationary_residual(transition, &p);
    if residual > STATIONARY_TOL {
        return Err(Error::NotErgodic(format!("stationary solve residual {residual:e}")));
    }
    Ok(p)
}

/// `max_u |(p M)_u - p_u|`.
pub fn stationary_residual(transition: &[Vec<f64>], p: &[f64]) -> f64 {
    let r = p.len();
    (0..r)
        .map(|u| {
            let next: f64 = (0..r).map(|v| p[v] * transition[v][u]).sum();
            (next - p[u]).abs()
        })
        .fold(0.0, f64::max)
}

/// Outcome of the hypothesis checks a finite chain must pass before the
/// cyclic shift null is consistent for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `max_{u,v} p(u | v)`; must be strictly below one.
    pub max_transition: f64,
    /// Ordered pairs `(u, v)` with `p2(v, u) = 0` while `p1(u) p1(v) > 0`.
    pub zero_pair_violations: Vec<(usize, usize)>,
    pub irreducible: bool,
    pub period: usize,
}

impl ConditionReport {
    pub fn max_transition_ok(&self) -> bool {
        self.max_transition < 1.0
    }

    pub fn ergodic(&self) -> bool {
        self.irreducible && self.period == 1
    }

    pub fn passes(&self) -> bool {
        self.max_transition_ok() && self.zero_pair_violations.is_empty() && self.ergodic()
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "max p(u|v) = {} ({}), {} zero-probability pair violation(s), irreducible = {}, period = {}",
            self.max_transition,
            if self.max_transition_ok() { "ok" } else { "must be < 1" },
            self.zero_pair_violations.len(),
            self.irreducible,
            self.period
        )
    }
}

fn base_report(transition: &[Vec<f64>], irreducible: bool, period: usize) -> ConditionReport {
    ConditionReport {
        max_transition: transition.iter().flatten().cloned().fold(0.0, f64::max),
        zero_pair_violations: Vec::new(),
        irreducible,
        period,
    }
}

/// Condition report for a raw transition matrix, including chains that are
/// not ergodic (for which no stationary law exists to build a spec).
pub fn check_transition_conditions(transition: &[Vec<f64>]) -> Result<ConditionReport> {
    validate_transition(transition)?;
    let (irreducible, period) = ergodicity(transition);
    if irreducible && period == 1 {
        let r = transition.len();
        let states = (0..r).map(|i| i as f64).collect();
        return Ok(MarkovChainSpec::new(states, transition.to_vec())?.check_conditions());
    }
    Ok(base_report(transition, irreducible, period))
}
