use std::collections::VecDeque;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use super::{ActionId, SspMdp, StateId};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 10_000_000;

/// Markovian policy `s -> a`. Entries for goal states are ignored.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StationaryPolicy(pub Vec<ActionId>);

impl StationaryPolicy {
    /// First available action in every state.
    pub fn first_available(model: &SspMdp) -> Self {
        Self(
            (0..model.n_states())
                .map(|s| model.actions(s).next().unwrap_or(0))
                .collect(),
        )
    }

    pub fn action(&self, s: StateId) -> ActionId {
        self.0[s]
    }
}

/// Per-state value in cost units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction(pub Vec<f64>);

impl ValueFunction {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Index<StateId> for ValueFunction {
    type Output = f64;

    fn index(&self, s: StateId) -> &f64 {
        &self.0[s]
    }
}

/// True iff every state reaches a goal with probability one under `policy`.
///
/// On a finite chain this holds exactly when every state has a positive
/// probability path to some goal, so a backward search from the goals suffices.
pub fn is_proper(model: &SspMdp, policy: &StationaryPolicy) -> bool {
    first_improper_state(model, policy).is_none()
}

pub(crate) fn first_improper_state(model: &SspMdp, policy: &StationaryPolicy) -> Option<StateId> {
    let n = model.n_states();
    if policy.0.len() != n {
        return Some(0);
    }
    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in (0..n).filter(|&s| !model.is_goal(s)) {
        let a = policy.0[s];
        if !model.has_action(s, a) {
            return Some(s);
        }
        for &(next, p) in model.successors(s, a) {
            if p > 0.0 {
                preds[next].push(s);
            }
        }
    }
    backward_reach(model, &preds).into_iter().position(|r| !r)
}

fn backward_reach(model: &SspMdp, preds: &[Vec<StateId>]) -> Vec<bool> {
    let mut reached = vec![false; model.n_states()];
    let mut queue: VecDeque<StateId> = model.goals().iter().copied().collect();
    for &g in model.goals() {
        reached[g] = true;
    }
    while let Some(s) = queue.pop_front() {
        for &p in &preds[s] {
            if !reached[p] {
                reached[p] = true;
                queue.push_back(p);
            }
        }
    }
    reached
}

/// Risk-neutral value of a proper policy by fixed-point iteration.
///
/// Iterates `V <- c + gamma * P V` from zero until the sup-norm change is at
/// most `epsilon` (or stops shrinking at floating-point resolution). The
/// operator is non-expansive, so the returned table has residual `<= epsilon`.
pub fn policy_evaluation_neutral(
    model: &SspMdp,
    policy: &StationaryPolicy,
    epsilon: f64,
) -> Result<ValueFunction> {
    if let Some(s) = first_improper_state(model, policy) {
        return Err(Error::ImproperPolicy(format!(
            "state {s} cannot reach a goal"
        )));
    }
    let n = model.n_states();
    let gamma = model.gamma();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..MAX_SWEEPS {
        let mut change = 0.0f64;
        let mut scale = 0.0f64;
        for s in 0..n {
            if model.is_goal(s) {
                next[s] = 0.0;
                continue;
            }
            let a = policy.0[s];
            let q = model.cost(s, a)
                + gamma
                    * model
                        .successors(s, a)
                        .iter()
                        .map(|&(t, p)| p * v[t])
                        .sum::<f64>();
            change = change.max((q - v[s]).abs());
            scale = scale.max(q.abs());
            next[s] = q;
        }
        std::mem::swap(&mut v, &mut next);
        if change <= epsilon || change <= stagnation(scale) {
            return Ok(ValueFunction(v));
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_SWEEPS,
        residual: f64::NAN,
    })
}

/// Change below which Jacobi sweeps only shuffle the last few ulps.
fn stagnation(scale: f64) -> f64 {
    16.0 * f64::EPSILON * scale.max(1.0)
}

/// Fails with [`Error::NoProperPolicy`] naming the first state from which no
/// action sequence reaches a goal.
pub(crate) fn ensure_goal_reachable(model: &SspMdp) -> Result<()> {
    let n = model.n_states();
    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in (0..n).filter(|&s| !model.is_goal(s)) {
        for a in model.actions(s) {
            for &(next, _) in model.successors(s, a) {
                preds[next].push(s);
            }
        }
    }
    match backward_reach(model, &preds).into_iter().position(|r| !r) {
        Some(s) => Err(Error::NoProperPolicy(s)),
        None => Ok(()),
    }
}

/// Optimal risk-neutral values and a greedy policy (lowest action id on ties).
pub fn value_iteration_neutral(
    model: &SspMdp,
    epsilon: f64,
) -> Result<(ValueFunction, StationaryPolicy)> {
    let n = model.n_states();
    ensure_goal_reachable(model)?;

    let gamma = model.gamma();
    let q = |v: &[f64], s: StateId, a: ActionId| {
        model.cost(s, a)
            + gamma
                * model
                    .successors(s, a)
                    .iter()
                    .map(|&(t, p)| p * v[t])
                    .sum::<f64>()
    };
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut converged = false;
    let mut last = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        let mut change = 0.0f64;
        let mut scale = 0.0f64;
        for s in 0..n {
            if model.is_goal(s) {
                continue;
            }
            let best = model
                .actions(s)
                .map(|a| q(&v, s, a))
                .fold(f64::INFINITY, f64::min);
            change = change.max((best - v[s]).abs());
            scale = scale.max(best.abs());
            next[s] = best;
        }
        std::mem::swap(&mut v, &mut next);
        last = change;
        if change <= epsilon || change <= stagnation(scale) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations: MAX_SWEEPS,
            residual: last,
        });
    }

    let policy = (0..n)
        .map(|s| {
            let mut best = (f64::INFINITY, model.actions(s).next().unwrap_or(0));
            for a in model.actions(s) {
                let qa = q(&v, s, a);
                if qa < best.0 {
                    best = (qa, a);
                }
            }
            best.1
        })
        .collect();
    Ok((ValueFunction(v), StationaryPolicy(policy)))
}

/// Best-outcome determinization value of the policy chain.
///
/// `V_min(s) = c(s, pi(s)) + gamma * min_{s' : P > 0} V_min(s')`, the cheapest
/// trajectory cost from `s`. It never exceeds the cost of any trajectory, so
/// it is an admissible (and consistent) search heuristic.
pub fn determinized_min_cost(model: &SspMdp, policy: &StationaryPolicy) -> Result<ValueFunction> {
    if let Some(s) = first_improper_state(model, policy) {
        return Err(Error::ImproperPolicy(format!(
            "state {s} cannot reach a goal"
        )));
    }
    let n = model.n_states();
    let gamma = model.gamma();
    let mut v: Vec<f64> = (0..n)
        .map(|s| if model.is_goal(s) { 0.0 } else { f64::INFINITY })
        .collect();
    // Bellman-Ford: optimal determinized paths are simple, so n sweeps suffice.
    for _ in 0..n {
        let mut changed = false;
        for s in (0..n).filter(|&s| !model.is_goal(s)) {
            let a = policy.0[s];
            let best = model
                .successors(s, a)
                .iter()
                .filter(|(_, p)| *p > 0.0)
                .map(|&(t, _)| v[t])
                .fold(f64::INFINITY, f64::min);
            let cand = model.cost(s, a) + gamma * best;
            if cand < v[s] {
                v[s] = cand;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(ValueFunction(v))
}
