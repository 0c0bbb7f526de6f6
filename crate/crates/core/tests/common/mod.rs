//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use cvarlab_core::{AtomGrid, DiscreteDistribution, SspBuilder, SspMdp, StationaryPolicy};
use rand::Rng;

/// Distribution of the accumulated cost from `s0` under `pi`, by forward
/// propagation of `(state, cost)` mass until less than `residual` remains
/// outside the goals.
pub fn trajectory_distribution(
    model: &SspMdp,
    pi: &StationaryPolicy,
    s0: usize,
    residual: f64,
) -> DiscreteDistribution {
    let key = |c: f64| (c * 1e9).round() as i64;
    let mut absorbed: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    let mut front: BTreeMap<(usize, i64), (f64, f64)> = BTreeMap::new();
    front.insert((s0, 0), (0.0, 1.0));
    let mut step = 0;
    loop {
        let mut live = 0.0;
        let mut next: BTreeMap<(usize, i64), (f64, f64)> = BTreeMap::new();
        for (&(s, _), &(cost, mass)) in &front {
            if model.is_goal(s) {
                absorbed.entry(key(cost)).or_insert((cost, 0.0)).1 += mass;
                continue;
            }
            let a = pi.0[s];
            let c = cost + model.gamma().powi(step) * model.cost(s, a);
            for &(t, p) in model.successors(s, a) {
                next.entry((t, key(c))).or_insert((c, 0.0)).1 += mass * p;
                live += mass * p;
            }
        }
        step += 1;
        let pending: f64 = next
            .iter()
            .filter(|((s, _), _)| !model.is_goal(*s))
            .map(|(_, v)| v.1)
            .sum();
        front = next;
        if pending < residual || live == 0.0 {
            for (&(s, _), &(cost, mass)) in &front {
                if model.is_goal(s) {
                    absorbed.entry(key(cost)).or_insert((cost, 0.0)).1 += mass;
                }
            }
            break;
        }
    }
    DiscreteDistribution::from_weighted(absorbed.into_values()).unwrap()
}

/// Brute-force `CVaR_alpha` and `VaR_alpha` written directly from the
/// definitions: VaR is the smallest `z` with `F(z) >= 1 - alpha` and CVaR
/// averages the worst `alpha` of the mass.
pub fn tail_measures(dist: &DiscreteDistribution, alpha: f64) -> (f64, f64) {
    let pairs: Vec<(f64, f64)> = dist
        .support()
        .iter()
        .copied()
        .zip(dist.probs().iter().copied())
        .collect();
    let mut cum = 0.0;
    let mut var = pairs.last().unwrap().0;
    for &(z, p) in &pairs {
        cum += p;
        if cum >= 1.0 - alpha - 1e-12 {
            var = z;
            break;
        }
    }
    let mut left = alpha;
    let mut acc = 0.0;
    for &(z, p) in pairs.iter().rev() {
        let take = p.min(left);
        acc += take * z;
        left -= take;
        if left <= 0.0 {
            break;
        }
    }
    (acc / alpha, var)
}

/// `y V(y)` of a curve given at `atoms`, interpolated linearly through `(0, 0)`.
pub fn interp_origin(atoms: &[f64], yv: &[f64], u: f64) -> f64 {
    let mut px = 0.0;
    let mut py = 0.0;
    for (&x, &v) in atoms.iter().zip(yv) {
        if u <= x {
            return py + (v - py) * (u - px) / (x - px);
        }
        px = x;
        py = v;
    }
    py
}

/// Envelope maximum by vertex enumeration: every successor except one sits on
/// a breakpoint of its curve and the free one takes the remaining budget.
pub fn envelope_lp(y: f64, succ: &[(f64, Vec<f64>, Vec<f64>)]) -> f64 {
    let n = succ.len();
    let choices: Vec<Vec<f64>> = succ
        .iter()
        .map(|(_, atoms, _)| std::iter::once(0.0).chain(atoms.iter().copied()).collect())
        .collect();
    let mut best = f64::NEG_INFINITY;
    for free in 0..n {
        let others: Vec<usize> = (0..n).filter(|&j| j != free).collect();
        let mut idx = vec![0usize; others.len()];
        loop {
            let mut used = 0.0;
            let mut obj = 0.0;
            for (slot, &j) in others.iter().enumerate() {
                let u = choices[j][idx[slot]];
                used += succ[j].0 * u;
                obj += succ[j].0 * interp_origin(&succ[j].1, &succ[j].2, u);
            }
            let (p, atoms, yv) = &succ[free];
            let u = (y - used) / p;
            if (-1e-12..=1.0 + 1e-12).contains(&u) {
                let u = u.clamp(0.0, 1.0);
                best = best.max((obj + p * interp_origin(atoms, yv, u)) / y);
            }
            // odometer over the fixed successors
            let mut d = 0;
            while d < idx.len() {
                idx[d] += 1;
                if idx[d] < choices[others[d]].len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == idx.len() {
                break;
            }
        }
    }
    best
}

/// Random concave `y V(y)` curve: descending VaR steps integrated over `atoms`.
pub fn random_concave_curve(rng: &mut impl Rng, atoms: &[f64]) -> Vec<f64> {
    let mut steps: Vec<f64> = (0..atoms.len())
        .map(|_| rng.random_range(0.0..100.0))
        .collect();
    steps.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut prev = 0.0;
    atoms
        .iter()
        .zip(steps)
        .map(|(&y, q)| {
            acc += q * (y - prev);
            prev = y;
            acc
        })
        .collect()
}

pub const COSTS: [f64; 4] = [0.5, 1.0, 2.0, 99.0];

/// Random proper SSP with `n_states <= 6` (last state is the goal) and up to
/// three actions. Every action keeps at least `0.3` of its mass on strictly
/// later states, so every stationary policy is proper.
pub fn random_ssp(rng: &mut impl Rng) -> SspMdp {
    let n = rng.random_range(2..=6usize);
    let n_actions = rng.random_range(1..=3usize);
    let goal = n - 1;
    let mut b = SspBuilder::new(n, n_actions).goal(goal);
    for s in 0..goal {
        for a in 0..n_actions {
            let forward = rng.random_range(s + 1..n);
            let mut next = vec![(forward, 0.0)];
            let extra = rng.random_range(0..=2usize);
            for _ in 0..extra {
                next.push((rng.random_range(0..n), 0.0));
            }
            let mut weights: Vec<f64> = (0..next.len())
                .map(|_| rng.random_range(1..=7) as f64)
                .collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let rest = 0.7;
            next[0].1 = 0.3 + rest * weights[0];
            for (e, w) in next.iter_mut().zip(&weights).skip(1) {
                e.1 = rest * w;
            }
            let cost = COSTS[rng.random_range(0..COSTS.len())];
            b.set_action(s, a, cost, next);
        }
    }
    b.build().unwrap()
}

pub fn random_policy(rng: &mut impl Rng, model: &SspMdp) -> StationaryPolicy {
    StationaryPolicy(
        (0..model.n_states())
            .map(|s| {
                let acts: Vec<usize> = model.actions(s).collect();
                acts[rng.random_range(0..acts.len())]
            })
            .collect(),
    )
}

/// Number of failures of the value-table invariants (concavity and
/// monotonicity of `y V`, monotonicity of `V`) with slack `tol`.
pub fn invariant_violations(grid: &AtomGrid, value: &[Vec<f64>], tol: f64) -> Vec<String> {
    let atoms = grid.atoms();
    let mut out = Vec::new();
    for (s, row) in value.iter().enumerate() {
        let yv: Vec<f64> = atoms.iter().zip(row).map(|(y, v)| y * v).collect();
        let mut prev_slope = f64::INFINITY;
        let (mut px, mut py) = (0.0, 0.0);
        for k in 0..atoms.len() {
            let slope = (yv[k] - py) / (atoms[k] - px);
            if slope > prev_slope + tol * prev_slope.abs().max(1.0) {
                out.push(format!("state {s}: y V not concave at atom {k}"));
            }
            if yv[k] + tol < py {
                out.push(format!("state {s}: y V decreases at atom {k}"));
            }
            if k > 0 && row[k] > row[k - 1] + tol * row[k - 1].abs().max(1.0) {
                out.push(format!("state {s}: V increases at atom {k}"));
            }
            prev_slope = slope;
            px = atoms[k];
            py = yv[k];
        }
    }
    out
}

/// `s0 -> g` at cost 1 with probability `1 - tail`, otherwise through `bad`
/// for a total of 100.
pub fn two_trajectory(tail: f64) -> SspMdp {
    SspBuilder::new(3, 1)
        .goal(2)
        .action(0, 0, 1.0, &[(2, 1.0 - tail), (1, tail)])
        .action(1, 0, 99.0, &[(2, 1.0)])
        .build()
        .unwrap()
}

pub fn chain(cost: f64) -> SspMdp {
    SspBuilder::new(2, 1)
        .goal(1)
        .action(0, 0, cost, &[(1, 1.0)])
        .build()
        .unwrap()
}
