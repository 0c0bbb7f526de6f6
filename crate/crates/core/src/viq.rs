//! CVaR value iteration in quantile form.
//!
//! Each successor's `y V(s', y)` curve is differentiated into a step quantile
//! function, the steps of all successors are mixed by transition probability,
//! and the mixture is integrated back at the atoms. One sort per `(s, a)`
//! serves every atom, which is what makes this solver fast.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::AtomGrid;
use crate::risk::{is_tie, LowerTail, PwlYcvar, MASS_TOL};
use crate::solver::{argmin_with_ties, map_states, sup_change, SolverConfig};
use crate::ssp::{ActionId, SspMdp, StateId};

/// Values, greedy actions and per-atom VaR on `S x Y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileSolution {
    pub grid: AtomGrid,
    pub value: Vec<Vec<f64>>,
    pub policy: Vec<Vec<ActionId>>,
    /// `var[s][k] = VaR_{y_k}` of the accumulated cost from `s`.
    pub var: Vec<Vec<f64>>,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub residual: f64,
}

impl QuantileSolution {
    pub fn initial(model: &SspMdp, grid: &AtomGrid) -> Self {
        let n = grid.len();
        Self {
            grid: grid.clone(),
            value: vec![vec![0.0; n]; model.n_states()],
            policy: (0..model.n_states())
                .map(|s| vec![model.actions(s).next().unwrap_or(0); n])
                .collect(),
            var: vec![vec![0.0; n]; model.n_states()],
            iterations: 0,
            residual: f64::INFINITY,
        }
    }
}

/// One quantile step of a successor mixture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Step {
    pub value: f64,
    pub mass: f64,
    pub successor: usize,
}

/// Probability mixture of the successors' step quantile functions, sorted
/// from the worst value down. The constant is the mixture of the curves'
/// values at `y = 0` (zero under [`LowerTail::Origin`]).
pub(crate) struct Mixture {
    pub steps: Vec<Step>,
    pub offset: f64,
}

impl Mixture {
    pub fn build(succ: &[(StateId, f64)], curves: &[PwlYcvar], tail: LowerTail) -> Self {
        let mut steps = Vec::new();
        let mut offset = 0.0;
        for (j, &(t, p)) in succ.iter().enumerate() {
            let curve = &curves[t];
            offset += p * curve.origin_value(tail);
            steps.extend(curve.pieces(tail).map(|(len, slope)| Step {
                value: slope,
                mass: p * len,
                successor: j,
            }));
        }
        // stable: equal values keep successor then segment order
        steps.sort_by(|a, b| b.value.total_cmp(&a.value));
        Self { steps, offset }
    }

    /// `(y CVaR_y, VaR_y)` of the mixture at each ascending `y`.
    pub fn integrate(&self, ys: &[f64]) -> Vec<(f64, f64)> {
        let steps = &self.steps;
        let mut out = Vec::with_capacity(ys.len());
        let (mut idx, mut cum_mass, mut cum_int) = (0usize, 0.0f64, self.offset);
        for &y in ys {
            while idx < steps.len() && cum_mass + steps[idx].mass <= y {
                cum_mass += steps[idx].mass;
                cum_int += steps[idx].mass * steps[idx].value;
                idx += 1;
            }
            let partial = if idx < steps.len() {
                (y - cum_mass).max(0.0) * steps[idx].value
            } else {
                0.0
            };
            out.push((cum_int + partial, self.quantile_from(idx, cum_mass, y)));
        }
        out
    }

    /// Smallest value `z` with `P(Z > z) <= y`, scanning from step `idx`.
    fn quantile_from(&self, mut idx: usize, mut cum_mass: f64, y: f64) -> f64 {
        let steps = &self.steps;
        while idx < steps.len() && cum_mass + steps[idx].mass <= y + MASS_TOL {
            cum_mass += steps[idx].mass;
            idx += 1;
        }
        match steps.get(idx) {
            Some(s) => s.value,
            None => steps.last().map_or(0.0, |s| s.value),
        }
    }

    pub fn quantile(&self, y: f64) -> f64 {
        self.quantile_from(0, 0.0, y)
    }
}

/// One distributional backup over all `(s, y_k)`.
pub fn viq_backup(
    model: &SspMdp,
    current: &QuantileSolution,
    cfg: &SolverConfig,
) -> QuantileSolution {
    let grid = &current.grid;
    let tail = cfg.lower_tail;
    let gamma = model.gamma();
    let curves: Vec<PwlYcvar> = current
        .value
        .iter()
        .map(|row| PwlYcvar::from_values(grid.atoms(), row))
        .collect();

    let rows = map_states(model.n_states(), cfg.parallel, |s| {
        let n = grid.len();
        if model.is_goal(s) {
            return (vec![0.0; n], current.policy[s].clone(), vec![0.0; n]);
        }
        let mut candidates: Vec<(ActionId, Vec<(f64, f64)>)> = Vec::new();
        for a in model.actions(s) {
            let c = model.cost(s, a);
            let mix = Mixture::build(model.successors(s, a), &curves, tail);
            let q = mix
                .integrate(grid.atoms())
                .into_iter()
                .zip(grid.atoms())
                .map(|((yc, var), &y)| (c + gamma * yc / y, c + gamma * var))
                .collect();
            candidates.push((a, q));
        }
        let mut values = vec![0.0; n];
        let mut actions = vec![0; n];
        let mut vars = vec![0.0; n];
        for k in 0..n {
            let (best, i) = argmin_with_ties(candidates.iter().map(|(_, q)| q[k].0));
            values[k] = best;
            actions[k] = candidates[i].0;
            vars[k] = candidates[i].1[k].1;
        }
        (values, actions, vars)
    });

    let mut next = QuantileSolution {
        grid: grid.clone(),
        value: Vec::with_capacity(rows.len()),
        policy: Vec::with_capacity(rows.len()),
        var: Vec::with_capacity(rows.len()),
        iterations: current.iterations + 1,
        residual: 0.0,
    };
    for (v, p, q) in rows {
        next.value.push(v);
        next.policy.push(p);
        next.var.push(q);
    }
    next.residual = sup_change(&current.value, &next.value);
    next
}

pub fn run_viq(model: &SspMdp, grid: &AtomGrid, cfg: &SolverConfig) -> Result<QuantileSolution> {
    if model.gamma() >= 1.0 {
        crate::ssp::eval::ensure_goal_reachable(model)?;
    }
    let mut sol = QuantileSolution::initial(model, grid);
    let start = Instant::now();
    while sol.iterations < cfg.max_iterations {
        let t = Instant::now();
        sol = viq_backup(model, &sol, cfg);
        log::debug!(
            "viq iteration {} change {:.3e} took {:?}",
            sol.iterations,
            sol.residual,
            t.elapsed()
        );
        if sol.residual <= cfg.epsilon {
            log::info!(
                "viq converged in {} iterations ({:?})",
                sol.iterations,
                start.elapsed()
            );
            return Ok(sol);
        }
    }
    Err(Error::NonConvergence {
        iterations: sol.iterations,
        residual: sol.residual,
    })
}

/// Density factors `xi(s, y_k, s')` recovered from the quantile representation.
///
/// Costs accumulate in the upper tail, so the portion of successor `s'` that
/// belongs to the `y`-tail of `Z(s)` is its mass strictly above the VaR
/// threshold `v` plus a common share `theta` of its mass sitting exactly at
/// `v`, with `theta` chosen so the tail holds exactly `y`:
///
/// ```text
/// y xi(s') = (1 - F_{s'}(v)) + theta * P_{s'}(Z = v)
/// ```
///
/// Both the threshold (the quantile of `s`) and each successor CDF are read
/// off the step functions of the value table.
pub fn xi_from_var(
    model: &SspMdp,
    sol: &QuantileSolution,
    s: StateId,
    k: usize,
    tail: LowerTail,
) -> Vec<(StateId, f64)> {
    if model.is_goal(s) {
        return Vec::new();
    }
    let grid = &sol.grid;
    let y = grid.atom(k);
    let a = sol.policy[s][k];
    let succ = model.successors(s, a);
    let curves: Vec<PwlYcvar> = succ
        .iter()
        .map(|&(t, _)| PwlYcvar::from_values(grid.atoms(), &sol.value[t]))
        .collect();
    let local: Vec<(StateId, f64)> = succ.iter().enumerate().map(|(j, &(_, p))| (j, p)).collect();
    let mix = Mixture::build(&local, &curves, tail);
    let v = mix.quantile(y);

    let mut above = vec![0.0; succ.len()];
    let mut at = vec![0.0; succ.len()];
    for step in &mix.steps {
        let p = succ[step.successor].1;
        if is_tie(step.value, v) {
            at[step.successor] += step.mass / p;
        } else if step.value > v {
            above[step.successor] += step.mass / p;
        }
    }
    let tail_above: f64 = succ.iter().zip(&above).map(|(&(_, p), u)| p * u).sum();
    let tail_at: f64 = succ.iter().zip(&at).map(|(&(_, p), u)| p * u).sum();
    let theta = if tail_at > 0.0 {
        ((y - tail_above) / tail_at).clamp(0.0, 1.0)
    } else {
        0.0
    };

    succ.iter()
        .enumerate()
        .map(|(j, &(t, _))| (t, ((above[j] + theta * at[j]).min(1.0) / y).max(0.0)))
        .collect()
}
