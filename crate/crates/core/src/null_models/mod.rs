//! Stationary null models for marker rows, their row likelihoods, and the
//! likelihood-ratio diagnostics `rho_t` and `gamma_m`.

mod ar1;
mod markov;
mod spec_file;

pub use ar1::Ar1Spec;
pub use markov::{
    check_transition_conditions, ergodicity, stationary_distribution, stationary_residual, validate_transition,
    ConditionReport, MarkovChainSpec,
};
pub use spec_file::{load_model_spec, parse_model_spec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::MarkerMatrix;

/// A stationary first-order model for a single row.
///
/// Discrete models return log probabilities, continuous ones log densities.
pub trait NullModel: Sync {
    /// `log p1(x)`.
    fn log_marginal(&self, x: f64) -> Result<f64>;
    /// `log p(next | prev)`.
    fn log_transition(&self, prev: f64, next: f64) -> Result<f64>;
}

impl NullModel for MarkovChainSpec {
    fn log_marginal(&self, x: f64) -> Result<f64> {
        Ok(self.stationary()[self.state_index(x)?].ln())
    }

    fn log_transition(&self, prev: f64, next: f64) -> Result<f64> {
        let (v, u) = (self.state_index(prev)?, self.state_index(next)?);
        Ok(self.transition()[v][u].ln())
    }
}

impl NullModel for Ar1Spec {
    fn log_marginal(&self, x: f64) -> Result<f64> {
        Ok(Ar1Spec::log_marginal(self, x))
    }

    fn log_transition(&self, prev: f64, next: f64) -> Result<f64> {
        Ok(Ar1Spec::log_transition(self, prev, next))
    }
}

/// Either supported null model, as read from a spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum NullModelSpec {
    Markov(MarkovChainSpec),
    Ar1(Ar1Spec),
}

impl NullModelSpec {
    /// Fails with [`Error::Conditions`] when a Markov chain violates the
    /// consistency hypotheses. Gaussian AR(1) with `|phi| < 1` satisfies the
    /// continuous-state boundedness condition analytically.
    pub fn check(&self) -> Result<()> {
        match self {
            NullModelSpec::Markov(spec) => {
                let report = spec.check_conditions();
                if report.passes() {
                    Ok(())
                } else {
                    Err(Error::Conditions(Box::new(report)))
                }
            }
            NullModelSpec::Ar1(_) => Ok(()),
        }
    }

    pub fn simulate(&self, n: usize, m: usize, seed: u64) -> Result<MarkerMatrix> {
        match self {
            NullModelSpec::Markov(spec) => spec.simulate(n, m, seed),
            NullModelSpec::Ar1(spec) => spec.simulate(n, m, seed),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            NullModelSpec::Markov(spec) => format!("markov(r={})", spec.n_states()),
            NullModelSpec::Ar1(spec) => format!("ar1(mean={}, sd={}, phi={})", spec.mean(), spec.sd(), spec.phi()),
        }
    }
}

impl NullModel for NullModelSpec {
    fn log_marginal(&self, x: f64) -> Result<f64> {
        match self {
            NullModelSpec::Markov(spec) => spec.log_marginal(x),
            NullModelSpec::Ar1(spec) => NullModel::log_marginal(spec, x),
        }
    }

    fn log_transition(&self, prev: f64, next: f64) -> Result<f64> {
        match self {
            NullModelSpec::Markov(spec) => spec.log_transition(prev, next),
            NullModelSpec::Ar1(spec) => NullModel::log_transition(spec, prev, next),
        }
    }
}

/// `log p_m(x) = log p1(x_0) + sum_j log p(x_j | x_{j-1})`. A zero-probability
/// step yields `-inf`.
pub fn row_log_likelihood(row: &[f64], model: &(impl NullModel + ?Sized)) -> Result<f64> {
    let first = row
        .first()
        .ok_or_else(|| Error::Dimension("likelihood of an empty row".into()))?;
    let mut total = model.log_marginal(*first)?;
    for w in row.windows(2) {
        total += model.log_transition(w[0], w[1])?;
    }
    Ok(total)
}

/// `rho_t(x) = p1(x_[t]) p1(x_[t-1]) / p2(x_[t-1], x_[t])`, indices mod `m`,
/// with `0/0 = 0`.
pub fn rho(row: &[f64], t: i64, model: &(impl NullModel + ?Sized)) -> Result<f64> {
    let m = row.len() as i64;
    if m == 0 {
        return Err(Error::Dimension("rho of an empty row".into()));
    }
    let cur = row[t.rem_euclid(m) as usize];
    let prev = row[(t - 1).rem_euclid(m) as usize];
    let (a, b) = (model.log_marginal(cur)?, model.log_marginal(prev)?);
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let step = model.log_transition(prev, cur)?;
    if step == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    // p1(cur) p1(prev) / (p1(prev) p(cur | prev))
    Ok((a - step).exp())
}

/// `gamma_m(x) = m^{-1} sum_{j=0}^{m-1} rho_j(x)`; `j = 0` is the
/// wrap-around pair `(x_{m-1}, x_0)`.
pub fn gamma_m(row: &[f64], model: &(impl NullModel + ?Sized)) -> Result<f64> {
    let m = row.len();
    let mut total = 0.0;
    for t in 0..m {
        total += rho(row, t as i64, model)?;
    }
    Ok(total / m as f64)
}

/// `log p_m(sigma_s(x))` for every shift `s` in `0..m`, in O(m) model calls.
///
/// The shifted row contains every cyclic transition of `x` except the one
/// entering position `s`, so its likelihood is the marginal of `x_s` plus
/// the cyclic transition total minus that single term.
pub fn shift_log_likelihoods(row: &[f64], model: &(impl NullModel + ?Sized)) -> Result<Vec<f64>> {
    let m = row.len();
    if m == 0 {
        return Err(Error::Dimension("likelihood of an empty row".into()));
    }
    let mut steps = Vec::with_capacity(m);
    for t in 0..m {
        let prev = row[if t == 0 { m - 1 } else { t - 1 }];
        steps.push(model.log_transition(prev, row[t])?);
    }
    let impossible = steps.iter().filter(|s| **s == f64::NEG_INFINITY).count();
    let finite_total: f64 = steps.iter().filter(|s| s.is_finite()).sum();
    let mut out = Vec::with_capacity(m);
    for (t, &step) in steps.iter().enumerate() {
        let excluded_impossible = usize::from(step == f64::NEG_INFINITY);
        let value = if impossible > excluded_impossible {
            f64::NEG_INFINITY
        } else {
            let rest = if step.is_finite() { finite_total - step } else { finite_total };
            model.log_marginal(row[t])? + rest
        };
        out.push(value);
    }
    Ok(out)
}

/// `log(x.max(..) + ln sum exp(x - max))`; `-inf` for an all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Per-row shift weights `p_m(sigma_s(x)) / sum_t p_m(sigma_t(x))`, in log space.
pub fn normalized_shift_log_weights(row: &[f64], model: &(impl NullModel + ?Sized)) -> Result<Vec<f64>> {
    let mut logs = shift_log_likelihoods(row, model)?;
    let total = log_sum_exp(&logs);
    if total == f64::NEG_INFINITY {
        return Err(Error::DegenerateSupport(
            "every cyclic shift of the row has zero likelihood".into(),
        ));
    }
    for l in &mut logs {
        *l -= total;
    }
    Ok(logs)
}
