//! Finite stochastic shortest path models.
//!
//! An [`SspMdp`] stores sparse transitions and deterministic costs indexed by
//! dense state and action ids. Goal states are absorbing and cost-free.
//! Models are immutable once built; every solver in this crate borrows them.

pub(crate) mod eval;
mod json;

use std::fmt;

use crate::error::{Error, Result};

pub use eval::{
    determinized_min_cost, is_proper, policy_evaluation_neutral, value_iteration_neutral,
    StationaryPolicy, ValueFunction,
};
pub use json::ModelFile;

pub type StateId = usize;
pub type ActionId = usize;

/// Tolerance on the total successor probability of each `(s, a)`.
pub const PROB_TOL: f64 = 1e-9;

/// A finite SSP `<S, A, P, c, G>` with discount factor.
#[derive(Clone, Debug, PartialEq)]
pub struct SspMdp {
    n_states: usize,
    n_actions: usize,
    /// `transitions[s][a]`; an empty list means `a` is unavailable in `s`.
    transitions: Vec<Vec<Vec<(StateId, f64)>>>,
    costs: Vec<Vec<f64>>,
    is_goal: Vec<bool>,
    goals: Vec<StateId>,
    gamma: f64,
    names: Option<Vec<String>>,
}

impl SspMdp {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn goals(&self) -> &[StateId] {
        &self.goals
    }

    #[inline]
    pub fn is_goal(&self, s: StateId) -> bool {
        self.is_goal[s]
    }

    #[inline]
    pub fn successors(&self, s: StateId, a: ActionId) -> &[(StateId, f64)] {
        &self.transitions[s][a]
    }

    #[inline]
    pub fn cost(&self, s: StateId, a: ActionId) -> f64 {
        self.costs[s][a]
    }

    /// Actions with at least one successor in `s`.
    pub fn actions(&self, s: StateId) -> impl Iterator<Item = ActionId> + '_ {
        self.transitions[s]
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.is_empty())
            .map(|(a, _)| a)
    }

    pub fn has_action(&self, s: StateId, a: ActionId) -> bool {
        a < self.n_actions && !self.transitions[s][a].is_empty()
    }

    pub fn state_name(&self, s: StateId) -> Option<&str> {
        self.names
            .as_ref()
            .and_then(|n| n.get(s))
            .map(String::as_str)
    }

    /// Checks every model invariant and reports each offending `(s, a)`.
    pub fn validate(&self) -> Vec<Violation> {
        validate_ssp(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ViolationKind {
    NoGoals,
    GoalOutOfRange,
    BadDiscount(f64),
    SuccessorOutOfRange(StateId),
    NegativeProbability(f64),
    ProbabilityMass(f64),
    NegativeCost(f64),
    GoalCostNonzero(f64),
    GoalNotAbsorbing,
    NoActions,
}

/// One broken invariant, located at a state and optionally an action.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub state: Option<StateId>,
    pub action: Option<ActionId>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.state, self.action) {
            (Some(s), Some(a)) => write!(f, "(s={s}, a={a}): ")?,
            (Some(s), None) => write!(f, "(s={s}): ")?,
            _ => {}
        }
        match &self.kind {
            ViolationKind::NoGoals => write!(f, "goal set is empty"),
            ViolationKind::GoalOutOfRange => write!(f, "goal id out of range"),
            ViolationKind::BadDiscount(g) => write!(f, "discount {g} outside (0, 1]"),
            ViolationKind::SuccessorOutOfRange(n) => write!(f, "successor {n} out of range"),
            ViolationKind::NegativeProbability(p) => write!(f, "negative probability {p}"),
            ViolationKind::ProbabilityMass(m) => write!(f, "probability mass sums to {m}"),
            ViolationKind::NegativeCost(c) => write!(f, "negative or non-finite cost {c}"),
            ViolationKind::GoalCostNonzero(c) => write!(f, "goal cost nonzero ({c})"),
            ViolationKind::GoalNotAbsorbing => write!(f, "goal is not absorbing"),
            ViolationKind::NoActions => write!(f, "non-goal state has no actions"),
        }
    }
}

/// Reports every violated model invariant. Never fails.
pub fn validate_ssp(model: &SspMdp) -> Vec<Violation> {
    let mut out = Vec::new();
    let at = |s: Option<StateId>, a: Option<ActionId>, kind| Violation {
        state: s,
        action: a,
        kind,
    };

    if model.goals.is_empty() {
        out.push(at(None, None, ViolationKind::NoGoals));
    }
    if model.goals.iter().any(|&g| g >= model.n_states) {
        out.push(at(None, None, ViolationKind::GoalOutOfRange));
    }
    if !(model.gamma > 0.0 && model.gamma <= 1.0) {
        out.push(at(None, None, ViolationKind::BadDiscount(model.gamma)));
    }

    for s in 0..model.n_states {
        let goal = model.is_goal[s];
        let mut any_action = false;
        for a in 0..model.n_actions {
            let succ = &model.transitions[s][a];
            let c = model.costs[s][a];
            if !(c >= 0.0 && c.is_finite()) {
                out.push(at(Some(s), Some(a), ViolationKind::NegativeCost(c)));
            } else if goal && c != 0.0 {
                out.push(at(Some(s), Some(a), ViolationKind::GoalCostNonzero(c)));
            }
            if succ.is_empty() {
                continue;
            }
            any_action = true;
            let mut mass = 0.0;
            for &(n, p) in succ {
                if n >= model.n_states {
                    out.push(at(Some(s), Some(a), ViolationKind::SuccessorOutOfRange(n)));
                }
                if p < 0.0 || !p.is_finite() {
                    out.push(at(Some(s), Some(a), ViolationKind::NegativeProbability(p)));
                }
                mass += p;
            }
            if (mass - 1.0).abs() > PROB_TOL {
                out.push(at(Some(s), Some(a), ViolationKind::ProbabilityMass(mass)));
            }
            if goal {
                let self_mass: f64 = succ.iter().filter(|(n, _)| *n == s).map(|(_, p)| p).sum();
                if (self_mass - 1.0).abs() > PROB_TOL {
                    out.push(at(Some(s), Some(a), ViolationKind::GoalNotAbsorbing));
                }
            }
        }
        if !goal && !any_action {
            out.push(at(Some(s), None, ViolationKind::NoActions));
        }
    }
    out
}

/// Incremental constructor for [`SspMdp`].
#[derive(Clone, Debug)]
pub struct SspBuilder {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<Vec<Vec<(StateId, f64)>>>,
    costs: Vec<Vec<f64>>,
    goals: Vec<StateId>,
    gamma: f64,
    names: Option<Vec<String>>,
}

impl SspBuilder {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            transitions: vec![vec![Vec::new(); n_actions]; n_states],
            costs: vec![vec![0.0; n_actions]; n_states],
            goals: Vec::new(),
            gamma: 1.0,
            names: None,
        }
    }

    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn goal(mut self, s: StateId) -> Self {
        self.add_goal(s);
        self
    }

    pub fn add_goal(&mut self, s: StateId) {
        if !self.goals.contains(&s) {
            self.goals.push(s);
        }
    }

    pub fn names(mut self, names: Vec<String>) -> Self {
        self.names = Some(names);
        self
    }

    /// Sets the outcome list and cost of `(s, a)`, replacing earlier entries.
    pub fn action(mut self, s: StateId, a: ActionId, cost: f64, next: &[(StateId, f64)]) -> Self {
        self.set_action(s, a, cost, next.to_vec());
        self
    }

    pub fn set_action(&mut self, s: StateId, a: ActionId, cost: f64, next: Vec<(StateId, f64)>) {
        self.transitions[s][a] = next;
        self.costs[s][a] = cost;
    }

    pub fn set_cost(&mut self, s: StateId, a: ActionId, cost: f64) {
        self.costs[s][a] = cost;
    }

    /// Builds without any checking. Duplicate successors are kept as given.
    pub fn build_unchecked(self) -> SspMdp {
        let mut is_goal = vec![false; self.n_states];
        for &g in &self.goals {
            if g < self.n_states {
                is_goal[g] = true;
            }
        }
        let mut goals = self.goals;
        goals.sort_unstable();
        SspMdp {
            n_states: self.n_states,
            n_actions: self.n_actions,
            transitions: self.transitions,
            costs: self.costs,
            is_goal,
            goals,
            gamma: self.gamma,
            names: self.names,
        }
    }

    /// Builds a validated model.
    ///
    /// Goals without outgoing transitions become absorbing self-loops for every
    /// action. Duplicate successors are merged, zero-probability outcomes
    /// dropped, and outcome lists within [`PROB_TOL`] of unit mass are
    /// renormalized. Any remaining violation is an error.
    pub fn build(mut self) -> Result<SspMdp> {
        for &g in &self.goals {
            if g < self.n_states && self.transitions[g].iter().all(Vec::is_empty) {
                for a in 0..self.n_actions {
                    self.transitions[g][a] = vec![(g, 1.0)];
                    self.costs[g][a] = 0.0;
                }
            }
        }
        for row in &mut self.transitions {
            for succ in row.iter_mut() {
                merge_outcomes(succ);
            }
        }
        let model = self.build_unchecked();
        let violations = validate_ssp(&model);
        if !violations.is_empty() {
            return Err(Error::InvalidModel(violations));
        }
        let mut model = model;
        for row in &mut model.transitions {
            for succ in row.iter_mut() {
                let mass: f64 = succ.iter().map(|(_, p)| p).sum();
                // within a few ulps of one already: leave exact inputs untouched
                if (mass - 1.0).abs() > 8.0 * f64::EPSILON && !succ.is_empty() {
                    succ.iter_mut().for_each(|(_, p)| *p /= mass);
                }
            }
        }
        Ok(model)
    }
}

fn merge_outcomes(succ: &mut Vec<(StateId, f64)>) {
    if succ.len() > 1 {
        succ.sort_by_key(|&(n, _)| n);
        let mut merged: Vec<(StateId, f64)> = Vec::with_capacity(succ.len());
        for &(n, p) in succ.iter() {
            match merged.last_mut() {
                Some((m, q)) if *m == n => *q += p,
                _ => merged.push((n, p)),
            }
        }
        *succ = merged;
    }
    succ.retain(|&(_, p)| p != 0.0);
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn well_formed_chain_has_no_violations() {
        assert!(validate_ssp(&chain(5.0)).is_empty());
    }

    #[test]
    fn short_mass_is_reported() {
        let m = SspBuilder::new(2, 1)
            .goal(1)
            .action(0, 0, 1.0, &[(1, 0.9)])
            .action(1, 0, 0.0, &[(1, 1.0)])
            .build_unchecked();
        let v = validate_ssp(&m);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0].kind, ViolationKind::ProbabilityMass(_)));
        assert_eq!((v[0].state, v[0].action), (Some(0), Some(0)));
        assert!(v[0].to_string().contains("probability mass"));
    }

    #[test]
    fn goal_cost_is_reported() {
        let m = SspBuilder::new(2, 1)
            .goal(1)
            .action(0, 0, 1.0, &[(1, 1.0)])
            .action(1, 0, 1.0, &[(1, 1.0)])
            .build_unchecked();
        let v = validate_ssp(&m);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0].kind, ViolationKind::GoalCostNonzero(_)));
        assert!(v[0].to_string().contains("goal cost nonzero"));
    }

    #[test]
    fn missing_goal_and_non_absorbing_goal() {
        let m = SspBuilder::new(1, 1)
            .action(0, 0, 1.0, &[(0, 1.0)])
            .build_unchecked();
        assert!(validate_ssp(&m)
            .iter()
            .any(|v| v.kind == ViolationKind::NoGoals));

        let m = SspBuilder::new(2, 1)
            .goal(1)
            .action(0, 0, 1.0, &[(1, 1.0)])
            .action(1, 0, 0.0, &[(0, 1.0)])
            .build_unchecked();
        assert!(validate_ssp(&m)
            .iter()
            .any(|v| v.kind == ViolationKind::GoalNotAbsorbing));
    }

    #[test]
    fn build_renormalizes_within_tolerance_and_rejects_beyond() {
        let m = SspBuilder::new(2, 1)
            .goal(1)
            .action(0, 0, 1.0, &[(0, 0.5 + 4e-10), (1, 0.5)])
            .build()
            .unwrap();
        let mass: f64 = m.successors(0, 0).iter().map(|(_, p)| p).sum();
        assert!((mass - 1.0).abs() < 1e-15);

        let err = SspBuilder::new(2, 1)
            .goal(1)
            .action(0, 0, 1.0, &[(0, 0.5), (1, 0.45)])
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn build_merges_duplicate_successors_and_closes_goals() {
        let m = SspBuilder::new(2, 2)
            .goal(1)
            .action(0, 0, 1.0, &[(1, 0.25), (0, 0.5), (1, 0.25)])
            .build()
            .unwrap();
        assert_eq!(m.successors(0, 0), &[(0, 0.5), (1, 0.5)]);
        assert_eq!(m.successors(1, 1), &[(1, 1.0)]);
        assert_eq!(m.actions(0).collect::<Vec<_>>(), vec![0]);
    }
}
