//! VaR and CVaR of finite cost distributions, the yCVaR representation and
//! the CVaR risk-envelope maximizer.

mod envelope;
mod ycvar;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use envelope::{maximize_risk_envelope, EnvelopeSolution};
pub use ycvar::{ycvar_from_dist, LowerTail, PwlYcvar, QuantileSteps};

/// Probability slack used when comparing cumulative masses against `1 - alpha`.
pub const MASS_TOL: f64 = 1e-12;

/// Relative tolerance under which two slopes, quantile steps or Q-values
/// count as equal.
pub const TIE_TOL: f64 = 1e-9;

/// `a` and `b` agree within [`TIE_TOL`], relative to their magnitude.
#[inline]
pub fn is_tie(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Finite distribution of accumulated cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    /// `support` strictly ascending, `probs` positive and summing to one.
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != probs.len() {
            return Err(Error::InvalidDistribution(
                "support and probs must match".into(),
            ));
        }
        if support.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidDistribution(
                "support not strictly ascending".into(),
            ));
        }
        if probs.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidDistribution(
                "probabilities must be positive".into(),
            ));
        }
        let mass: f64 = probs.iter().sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {mass}"
            )));
        }
        Ok(Self { support, probs })
    }

    pub fn point(value: f64) -> Self {
        Self {
            support: vec![value],
            probs: vec![1.0],
        }
    }

    /// Sorts and merges equal values; weights are normalized to unit mass.
    pub fn from_weighted(items: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut items: Vec<(f64, f64)> = items.into_iter().filter(|&(_, w)| w > 0.0).collect();
        if items.is_empty() {
            return Err(Error::InvalidDistribution("no positive weights".into()));
        }
        items.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = items.iter().map(|(_, w)| w).sum();
        let mut support = Vec::with_capacity(items.len());
        let mut probs: Vec<f64> = Vec::with_capacity(items.len());
        for (v, w) in items {
            if support.last() == Some(&v) {
                *probs.last_mut().unwrap() += w / total;
            } else {
                support.push(v);
                probs.push(w / total);
            }
        }
        Ok(Self { support, probs })
    }

    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        Self::from_weighted(samples.iter().map(|&v| (v, 1.0)))
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .map(|(z, p)| z * p)
            .sum()
    }

    /// Right-continuous CDF `P(Z <= z)`.
    pub fn cdf(&self, z: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .take_while(|(v, _)| **v <= z)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn min(&self) -> f64 {
        self.support[0]
    }

    pub fn max(&self) -> f64 {
        *self.support.last().unwrap()
    }
}

/// `VaR_alpha(Z) = min { z : F(z) >= 1 - alpha }`.
pub fn var(dist: &DiscreteDistribution, alpha: f64) -> f64 {
    let target = 1.0 - alpha - MASS_TOL;
    let mut cum = 0.0;
    for (&z, &p) in dist.support.iter().zip(&dist.probs) {
        cum += p;
        if cum >= target {
            return z;
        }
    }
    dist.max()
}

/// `CVaR_alpha(Z) = VaR_alpha + E[(Z - VaR_alpha)^+] / alpha`; `alpha = 1` gives the mean.
pub fn cvar(dist: &DiscreteDistribution, alpha: f64) -> f64 {
    let w = var(dist, alpha);
    let excess: f64 = dist
        .support
        .iter()
        .zip(&dist.probs)
        .map(|(&z, &p)| p * (z - w).max(0.0))
        .sum();
    w + excess / alpha
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> DiscreteDistribution {
        DiscreteDistribution::new(vec![1.0, 100.0], vec![0.9, 0.1]).unwrap()
    }

    #[test]
    fn var_examples() {
        assert_eq!(var(&two_point(), 0.1), 1.0);
        assert_eq!(var(&two_point(), 0.05), 100.0);
        let c = DiscreteDistribution::point(3.5);
        assert_eq!(var(&c, 0.3), 3.5);
        assert_eq!(var(&c, 0.999), 3.5);
    }

    #[test]
    fn cvar_examples() {
        let z = two_point();
        assert!((cvar(&z, 0.1) - 100.0).abs() < 1e-12);
        assert!((cvar(&z, 0.2) - 50.5).abs() < 1e-12);
        assert!((cvar(&z, 1.0) - 10.9).abs() < 1e-12);
    }

    #[test]
    fn cvar_matches_minimization_over_support() {
        // min over w of w + E[(Z - w)^+] / alpha is attained on the support
        let z =
            DiscreteDistribution::new(vec![0.5, 2.0, 7.0, 30.0], vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        for alpha in [0.05, 0.1, 0.15, 0.3, 0.5, 0.75, 1.0] {
            let brute = z
                .support()
                .iter()
                .map(|&w| {
                    w + z
                        .support()
                        .iter()
                        .zip(z.probs())
                        .map(|(&v, &p)| p * (v - w).max(0.0))
                        .sum::<f64>()
                        / alpha
                })
                .fold(f64::INFINITY, f64::min);
            assert!((cvar(&z, alpha) - brute).abs() < 1e-12, "alpha {alpha}");
        }
    }

    #[test]
    fn rejects_bad_distributions() {
        assert!(DiscreteDistribution::new(vec![2.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteDistribution::new(vec![1.0, 2.0], vec![0.5, 0.4]).is_err());
        assert!(DiscreteDistribution::new(vec![1.0, 2.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn from_weighted_merges() {
        let d = DiscreteDistribution::from_samples(&[3.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(d.support(), &[1.0, 2.0, 3.0]);
        assert_eq!(d.probs(), &[0.25, 0.25, 0.5]);
        assert_eq!(d.cdf(2.5), 0.5);
    }
}
