use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{default_columns, default_row_ids, MarkerMatrix};
use crate::rng::{self, domain};
use crate::special::{inv_norm_cdf, norm_log_pdf};

/// Stationary Gaussian AR(1): marginal `Normal(mean, sd^2)`, lag-one
/// correlation `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1Spec {
    mean: f64,
    sd: f64,
    phi: f64,
}

impl Ar1Spec {
    pub fn new(mean: f64, sd: f64, phi: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::Config(format!("AR(1) mean {mean} is not finite")));
        }
        if !(sd.is_finite() && sd > 0.0) {
            return Err(Error::Config(format!("AR(1) standard deviation must be positive, got {sd}")));
        }
        if !(phi.abs() < 1.0) {
            return Err(Error::Config(format!("AR(1) correlation must lie in (-1, 1), got {phi}")));
        }
        Ok(Self { mean, sd, phi })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Standard deviation of the innovations, `sd * sqrt(1 - phi^2)`.
    pub fn innovation_sd(&self) -> f64 {
        self.sd * (1.0 - self.phi * self.phi).sqrt()
    }

    pub fn log_marginal(&self, x: f64) -> f64 {
        norm_log_pdf((x - self.mean) / self.sd) - self.sd.ln()
    }

    /// Log density of `next` given `prev`.
    pub fn log_transition(&self, prev: f64, next: f64) -> f64 {
        let s = self.innovation_sd();
        let centre = self.mean + self.phi * (prev - self.mean);
        norm_log_pdf((next - centre) / s) - s.ln()
    }

    /// Rows start from the stationary law, so every column has the same
    /// marginal. Normals come from the inverse CDF of open-interval uniforms.
    pub fn simulate(&self, n: usize, m: usize, seed: u64) -> Result<MarkerMatrix> {
        let innovation = self.innovation_sd();
        let values: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut rng = rng::stream(seed, domain::AR1_ROWS, i as u64);
                let mut normal = move || inv_norm_cdf(rng::open_unit(&mut rng)).expect("open unit draw");
                let mut row = Vec::with_capacity(m);
                let mut x = self.mean + self.sd * normal();
                row.push(x);
                for _ in 1..m {
                    x = self.mean + self.phi * (x - self.mean) + innovation * normal();
                    row.push(x);
                }
                row
            })
            .collect();
        MarkerMatrix::from_flat(values, n, m, default_row_ids(n), default_columns(m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lag1(row: &[f64]) -> (f64, f64) {
        let m = row.len() as f64;
        let mean = row.iter().sum::<f64>() / m;
        let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m;
        let cov = row.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / m;
        (cov / var, var)
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(Ar1Spec::new(0.0, 0.0, 0.5).is_err());
        assert!(Ar1Spec::new(0.0, 1.0, 1.0).is_err());
        assert!(Ar1Spec::new(0.0, 1.0, -1.2).is_err());
        assert!(Ar1Spec::new(f64::NAN, 1.0, 0.2).is_err());
    }

    #[test]
    fn independent_case() {
        let spec = Ar1Spec::new(2.0, 3.0, 0.0).unwrap();
        let m = 20_000;
        let x = spec.simulate(1, m, 3).unwrap();
        let (r, var) = lag1(x.row(0));
        assert!(r.abs() < 4.0 / (m as f64).sqrt(), "lag-1 correlation {r}");
        assert!((var / 9.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn correlated_case_matches_parameters() {
        let spec = Ar1Spec::new(0.0, 1.0, 0.9).unwrap();
        let x = spec.simulate(1, 100_000, 17).unwrap();
        let (r, var) = lag1(x.row(0));
        assert!((r - 0.9).abs() < 0.01, "lag-1 correlation {r}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn seeded() {
        let spec = Ar1Spec::new(0.0, 1.0, 0.5).unwrap();
        assert_eq!(spec.simulate(2, 30, 1).unwrap(), spec.simulate(2, 30, 1).unwrap());
        assert_ne!(spec.simulate(2, 30, 1).unwrap(), spec.simulate(2, 30, 2).unwrap());
    }

    #[test]
    fn transition_density_integrates_to_joint() {
        // f1(v) f(u|v) must equal the bivariate normal density with
        // correlation phi.
        let spec = Ar1Spec::new(0.5, 2.0, 0.7).unwrap();
        let (v, u) = (1.3, -0.4);
        let (zv, zu) = ((v - 0.5) / 2.0, (u - 0.5) / 2.0);
        let rho: f64 = 0.7;
        let det = 1.0 - rho * rho;
        let log_joint = -(zv * zv - 2.0 * rho * zv * zu + zu * zu) / (2.0 * det)
            - (2.0 * std::f64::consts::PI).ln()
            - 0.5 * det.ln()
            - 2.0 * 2f64.ln();
        let got = spec.log_marginal(v) + spec.log_transition(v, u);
        assert!((got - log_joint).abs() < 1e-12);
    }
}
