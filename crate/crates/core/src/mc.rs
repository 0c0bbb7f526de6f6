//! Monte-Carlo rollouts of fixed policies.
//!
//! Rollout `i` draws from its own ChaCha8 stream (`seed`, stream `i`), so
//! results do not depend on thread count or scheduling.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forpecvar::{nearest_atom_log, next_atom, PolicySpec};
use crate::risk::{cvar, var, DiscreteDistribution};
use crate::ssp::{SspMdp, StateId};

/// Largest tolerated fraction of rollouts that hit the step limit.
pub const MAX_FAILURE_RATE: f64 = 1e-3;

const BATCH: usize = 4096;
/// Smaller batches keep a tight time budget from being overshot.
const BUDGET_BATCH: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub max_steps: usize,
    /// Stop drawing new batches once this many seconds have passed.
    pub time_budget: Option<f64>,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: 0,
            max_steps: 100_000,
            time_budget: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub distribution: DiscreteDistribution,
    /// Completed rollouts (excluding failures).
    pub samples: usize,
    pub failures: usize,
}

/// Empirical cost distribution of `cfg.samples` rollouts from `s0`.
///
/// Augmented policies start at the atom nearest `alpha` and update it along
/// the rollout as the exact evaluator does.
pub fn simulate_policy(
    model: &SspMdp,
    spec: PolicySpec<'_>,
    s0: StateId,
    alpha: f64,
    cfg: &McConfig,
) -> Result<McResult> {
    if cfg.samples == 0 {
        return Err(Error::InvalidArgument(
            "at least one sample is required".into(),
        ));
    }
    if s0 >= model.n_states() {
        return Err(Error::InvalidArgument(format!(
            "start state {s0} out of range"
        )));
    }
    let k0 = match spec {
        PolicySpec::Augmented(p) => nearest_atom_log(&p.grid, alpha)?,
        PolicySpec::Stationary(_) => 0,
    };
    let deadline = cfg
        .time_budget
        .map(|t| Instant::now() + Duration::from_secs_f64(t.max(0.0)));

    let mut costs: Vec<Option<f64>> = Vec::with_capacity(cfg.samples);
    let batch_size = if deadline.is_some() {
        BUDGET_BATCH
    } else {
        BATCH
    };
    let mut next = 0usize;
    while next < cfg.samples {
        let end = (next + batch_size).min(cfg.samples);
        let batch: Vec<Option<f64>> = (next..end)
            .into_par_iter()
            .map(|i| rollout(model, spec, s0, k0, cfg, i as u64))
            .collect();
        costs.extend(batch);
        next = end;
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
    }

    let drawn = costs.len();
    let done: Vec<f64> = costs.into_iter().flatten().collect();
    let failures = drawn - done.len();
    if failures as f64 > MAX_FAILURE_RATE * drawn as f64 || done.is_empty() {
        return Err(Error::TooManyFailures {
            failures,
            samples: drawn,
        });
    }
    Ok(McResult {
        distribution: DiscreteDistribution::from_samples(&done)?,
        samples: done.len(),
        failures,
    })
}

fn rollout(
    model: &SspMdp,
    spec: PolicySpec<'_>,
    s0: StateId,
    k0: usize,
    cfg: &McConfig,
    i: u64,
) -> Option<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(i);
    let (mut s, mut k) = (s0, k0);
    let mut cost = 0.0;
    let mut discount = 1.0;
    for _ in 0..cfg.max_steps {
        if model.is_goal(s) {
            return Some(cost);
        }
        let a = match spec {
            PolicySpec::Stationary(pi) => pi.action(s),
            PolicySpec::Augmented(p) => p.action[s][k],
        };
        cost += discount * model.cost(s, a);
        discount *= model.gamma();
        let succ = model.successors(s, a);
        let j = sample_index(succ, rng.random::<f64>());
        let t = succ[j].0;
        if let PolicySpec::Augmented(p) = spec {
            k = next_atom(&p.grid, k, p.factor(s, k, j, t));
        }
        s = t;
    }
    model.is_goal(s).then_some(cost)
}

fn sample_index(succ: &[(StateId, f64)], u: f64) -> usize {
    let mut acc = 0.0;
    for (j, &(_, p)) in succ.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    succ.len() - 1
}

/// Empirical `(CVaR_alpha, VaR_alpha)`; the boundary sample is weighted
/// fractionally so the tail has mass exactly `alpha`.
pub fn mc_cvar_estimate(samples: &DiscreteDistribution, alpha: f64) -> (f64, f64) {
    (cvar(samples, alpha), var(samples, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssp::fixtures::*;
    use crate::ssp::StationaryPolicy;

    fn run(model: &SspMdp, s0: usize, cfg: &McConfig) -> Result<McResult> {
        let pi = StationaryPolicy::first_available(model);
        simulate_policy(model, PolicySpec::Stationary(&pi), s0, 1.0, cfg)
    }

    #[test]
    fn deterministic_chain_samples() {
        let r = run(
            &chain(5.0),
            0,
            &McConfig {
                samples: 100,
                ..McConfig::default()
            },
        )
        .unwrap();
        assert_eq!(r.distribution.support(), &[5.0]);
        assert_eq!(r.samples, 100);
    }

    #[test]
    fn goal_start_is_zero() {
        let r = run(
            &two_trajectory(),
            2,
            &McConfig {
                samples: 50,
                ..McConfig::default()
            },
        )
        .unwrap();
        assert_eq!(r.distribution.support(), &[0.0]);
    }

    #[test]
    fn two_trajectory_frequency() {
        let cfg = McConfig {
            samples: 1_000_000,
            seed: 11,
            ..McConfig::default()
        };
        let r = run(&two_trajectory(), 0, &cfg).unwrap();
        assert_eq!(r.distribution.support(), &[1.0, 100.0]);
        assert!((r.distribution.probs()[0] - 0.9).abs() < 1e-3);
    }

    #[test]
    fn seeded_runs_repeat() {
        let cfg = McConfig {
            samples: 20_000,
            seed: 5,
            ..McConfig::default()
        };
        assert_eq!(
            run(&self_loop(), 0, &cfg).unwrap(),
            run(&self_loop(), 0, &cfg).unwrap()
        );
    }

    #[test]
    fn short_horizon_fails() {
        let cfg = McConfig {
            samples: 1000,
            max_steps: 1,
            ..McConfig::default()
        };
        assert!(matches!(
            run(&self_loop(), 0, &cfg),
            Err(Error::TooManyFailures { .. })
        ));
    }

    #[test]
    fn estimate_examples() {
        let mut xs = vec![1.0; 9];
        xs.push(100.0);
        let d = DiscreteDistribution::from_samples(&xs).unwrap();
        assert!((mc_cvar_estimate(&d, 0.1).0 - 100.0).abs() < 1e-9);
        let mut xs = vec![1.0; 8];
        xs.extend([100.0, 100.0]);
        let d = DiscreteDistribution::from_samples(&xs).unwrap();
        assert!((mc_cvar_estimate(&d, 0.2).0 - 100.0).abs() < 1e-9);
        let d = DiscreteDistribution::from_samples(&[3.0; 7]).unwrap();
        assert_eq!(mc_cvar_estimate(&d, 0.3), (3.0, 3.0));
    }
}
