//! Exact CVaR/VaR evaluation of a fixed policy by best-first trajectory
//! expansion.
//!
//! Trajectories are expanded in order of accumulated cost plus an admissible
//! heuristic, so goal outcomes are collected cheapest first. Once the popped
//! goal mass `P` reaches `1 - alpha`, the unpopped tail has partial
//! expectation `E[Z] - E[Z 1{Z <= X}]` and the CVaR follows by splitting the
//! last popped cost level `X` across the boundary of the `alpha`-tail.
//!
//! Policies are either Markovian (`s -> a`) or augmented (`(s, y) -> a` with
//! a density factor `xi` driving `y`); in the latter case each search node
//! tracks its atom instead of a history.

mod extended;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::AtomGrid;
use crate::risk::{LowerTail, MASS_TOL};
use crate::ssp::{
    determinized_min_cost, policy_evaluation_neutral, ActionId, SspMdp, StateId, StationaryPolicy,
    ValueFunction,
};
use crate::vili::AugmentedSolution;
use crate::viq::{xi_from_var, QuantileSolution};

pub use extended::{
    create_extended_mdp, mdp_policy_evaluation, next_atom, ExtendedMdp, EXACT_EPSILON,
};

/// Atom of `grid` closest to `alpha` in log distance.
pub fn nearest_atom_log(grid: &AtomGrid, alpha: f64) -> Result<usize> {
    grid.nearest_log(alpha)
}

/// Policy on augmented states with the density factors that update `y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedPolicy {
    pub grid: AtomGrid,
    pub action: Vec<Vec<ActionId>>,
    /// `xi[s][k][j]` pairs the j-th successor of `action[s][k]` with its factor.
    pub xi: Vec<Vec<Vec<(StateId, f64)>>>,
}

impl AugmentedPolicy {
    /// Factor for the `j`-th successor `t` of `(s, y_k)`; one when unknown.
    #[inline]
    pub fn factor(&self, s: StateId, k: usize, j: usize, t: StateId) -> f64 {
        let xi = &self.xi[s][k];
        match xi.get(j) {
            Some(&(u, f)) if u == t => f,
            _ => xi.iter().find(|e| e.0 == t).map_or(1.0, |e| e.1),
        }
    }

    /// Recovers `xi` for a quantile solution from its value table.
    pub fn from_quantile(model: &SspMdp, sol: &QuantileSolution, tail: LowerTail) -> Self {
        let xi = (0..model.n_states())
            .map(|s| {
                (0..sol.grid.len())
                    .map(|k| xi_from_var(model, sol, s, k, tail))
                    .collect()
            })
            .collect();
        Self {
            grid: sol.grid.clone(),
            action: sol.policy.clone(),
            xi,
        }
    }
}

impl From<&AugmentedSolution> for AugmentedPolicy {
    fn from(sol: &AugmentedSolution) -> Self {
        Self {
            grid: sol.grid.clone(),
            action: sol.policy.clone(),
            xi: sol.xi.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum PolicySpec<'a> {
    Stationary(&'a StationaryPolicy),
    Augmented(&'a AugmentedPolicy),
}

/// Search heuristic over the policy's tracked states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Heuristic {
    Zero,
    /// Best-outcome determinized cost of the policy chain.
    #[default]
    MinCost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForpecvarConfig {
    /// Accumulated costs closer than this group into one node.
    pub group_tolerance: f64,
    /// Maximum pops without reaching a goal before the policy is declared stalled.
    pub node_budget: usize,
}

impl Default for ForpecvarConfig {
    fn default() -> Self {
        Self {
            group_tolerance: 1e-9,
            node_budget: 50_000_000,
        }
    }
}

/// `(X, y^X, V(s0, y^X))` recorded at a goal pop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint(pub f64, pub f64, pub f64);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub cvar: f64,
    pub var: f64,
    pub trace: Vec<TracePoint>,
    #[serde(skip)]
    pub mean: f64,
    #[serde(skip)]
    pub expanded: usize,
}

/// Evaluator with the policy's risk-neutral and best-outcome values cached,
/// for repeated queries over start states and confidence levels.
pub struct Evaluator<'a> {
    model: &'a SspMdp,
    spec: PolicySpec<'a>,
    mean: ValueFunction,
    min_cost: ValueFunction,
    cfg: ForpecvarConfig,
}

impl<'a> Evaluator<'a> {
    pub fn new(model: &'a SspMdp, spec: PolicySpec<'a>, cfg: ForpecvarConfig) -> Result<Self> {
        let (mean, min_cost) = match spec {
            PolicySpec::Stationary(pi) => (
                policy_evaluation_neutral(model, pi, EXACT_EPSILON)?,
                determinized_min_cost(model, pi)?,
            ),
            PolicySpec::Augmented(policy) => {
                let (_, mean, min) = mdp_policy_evaluation(model, policy)?;
                (mean, min)
            }
        };
        Ok(Self {
            model,
            spec,
            mean,
            min_cost,
            cfg,
        })
    }

    /// Risk-neutral value per tracked state (`s`, or `s * |Y| + k`).
    pub fn mean_values(&self) -> &ValueFunction {
        &self.mean
    }

    pub fn min_cost_values(&self) -> &ValueFunction {
        &self.min_cost
    }

    fn start_track(&self, s0: StateId, alpha: f64) -> Result<usize> {
        match self.spec {
            PolicySpec::Stationary(_) => Ok(s0),
            PolicySpec::Augmented(p) => Ok(s0 * p.grid.len() + nearest_atom_log(&p.grid, alpha)?),
        }
    }

    pub fn evaluate(&self, s0: StateId, alpha: f64, heuristic: Heuristic) -> Result<EvalResult> {
        let zeros;
        let h: &[f64] = match heuristic {
            Heuristic::MinCost => self.min_cost.as_slice(),
            Heuristic::Zero => {
                zeros = vec![0.0; self.mean.0.len()];
                &zeros
            }
        };
        self.evaluate_with(s0, alpha, h)
    }

    /// Runs the search with an explicit heuristic indexed like [`Self::mean_values`].
    pub fn evaluate_with(&self, s0: StateId, alpha: f64, heuristic: &[f64]) -> Result<EvalResult> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha {alpha} outside (0, 1]"
            )));
        }
        if s0 >= self.model.n_states() {
            return Err(Error::InvalidArgument(format!(
                "start state {s0} out of range"
            )));
        }
        if heuristic.len() != self.mean.0.len() {
            return Err(Error::InvalidArgument(
                "heuristic has the wrong length".into(),
            ));
        }
        let track0 = self.start_track(s0, alpha)?;
        let mean = self.mean[track0];
        let mut search = Search::new(self.model, self.spec, heuristic, &self.cfg);
        search.push(track0, s0, 0.0, 1.0, 0);

        let mut popped_mass = 0.0;
        let mut popped_cost = 0.0; // sum of cost * prob over popped goals
        let mut x = f64::NAN;
        let mut trace = Vec::new();
        let mut since_goal = 0usize;

        let mut record = |cost: f64, prob: f64, trace: &mut Vec<TracePoint>| {
            popped_mass += prob;
            popped_cost += cost * prob;
            let y = (1.0 - popped_mass).max(0.0);
            let v = if y > MASS_TOL {
                (mean - popped_cost) / y
            } else {
                cost
            };
            // a pop too light to move y in floating point only refreshes the
            // last entry's value; its cost stays with the pop that moved y
            match trace.last_mut() {
                Some(last) if last.1 <= y => last.2 = v,
                _ => trace.push(TracePoint(cost, y, v)),
            }
            (popped_mass, popped_cost)
        };

        let mut state = (0.0, 0.0);
        // alpha = 1 is the expectation; only VaR_1 (the cheapest outcome) needs the search
        let done = |p: f64, trace: &[TracePoint]| {
            if alpha >= 1.0 {
                !trace.is_empty()
            } else {
                1.0 - p <= alpha + MASS_TOL
            }
        };
        while !done(state.0, &trace) {
            let Some(node) = search.pop() else {
                return Err(Error::ImproperPolicy(format!(
                    "frontier exhausted with goal mass {} < {}",
                    state.0,
                    1.0 - alpha
                )));
            };
            if self.model.is_goal(node.state) {
                state = record(node.cost, node.prob, &mut trace);
                x = trace.last().map_or(node.cost, |t| t.0);
                since_goal = 0;
            } else {
                since_goal += 1;
                if since_goal > self.cfg.node_budget {
                    return Err(Error::ImproperPolicy(format!(
                        "no goal reached within {} expansions",
                        self.cfg.node_budget
                    )));
                }
                search.expand(&node);
            }
        }

        let (p, s_le) = state;
        let cvar = if alpha >= 1.0 {
            mean
        } else {
            let y = 1.0 - p;
            let (y, tail) = if y > MASS_TOL {
                (y, mean - s_le)
            } else {
                (0.0, 0.0)
            };
            (tail + (alpha - y) * x) / alpha
        };
        Ok(EvalResult {
            cvar,
            var: x,
            trace,
            mean,
            expanded: search.expanded,
        })
    }
}

/// Exact `(CVaR_alpha, VaR_alpha)` of the accumulated cost from `s0`.
///
/// `heuristic` must be admissible for the tracked states; `None` uses the
/// determinized min-cost values of the policy.
pub fn run_forpecvar(
    model: &SspMdp,
    spec: PolicySpec<'_>,
    s0: StateId,
    alpha: f64,
    heuristic: Option<&ValueFunction>,
    cfg: &ForpecvarConfig,
) -> Result<EvalResult> {
    let ev = Evaluator::new(model, spec, cfg.clone())?;
    match heuristic {
        Some(h) => ev.evaluate_with(s0, alpha, h.as_slice()),
        None => ev.evaluate(s0, alpha, Heuristic::MinCost),
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    track: usize,
    state: StateId,
    cost: f64,
    prob: f64,
    t: u32,
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    priority: f64,
    cost: f64,
    state: StateId,
    seq: u64,
    slot: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // reversed: BinaryHeap pops the smallest (priority, cost, state, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| other.cost.total_cmp(&self.cost))
            .then_with(|| other.state.cmp(&self.state))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

type GroupKey = (usize, i64, u32);

struct Search<'a> {
    model: &'a SspMdp,
    spec: PolicySpec<'a>,
    heuristic: &'a [f64],
    group_tolerance: f64,
    nodes: Vec<Node>,
    heap: BinaryHeap<Entry>,
    open: HashMap<GroupKey, usize>,
    seq: u64,
    expanded: usize,
}

impl<'a> Search<'a> {
    fn new(
        model: &'a SspMdp,
        spec: PolicySpec<'a>,
        heuristic: &'a [f64],
        cfg: &ForpecvarConfig,
    ) -> Self {
        Self {
            model,
            spec,
            heuristic,
            group_tolerance: cfg.group_tolerance,
            nodes: Vec::new(),
            heap: BinaryHeap::new(),
            open: HashMap::new(),
            seq: 0,
            expanded: 0,
        }
    }

    fn key(&self, track: usize, cost: f64, t: u32) -> GroupKey {
        // stages only matter when later costs are discounted
        let stage = if self.model.gamma() < 1.0 { t } else { 0 };
        (track, (cost / self.group_tolerance).round() as i64, stage)
    }

    /// Inserts a node, or adds its probability to an open node with the same
    /// tracked state and accumulated cost.
    fn push(&mut self, track: usize, state: StateId, cost: f64, prob: f64, t: u32) {
        let key = self.key(track, cost, t);
        if let Some(&slot) = self.open.get(&key) {
            self.nodes[slot].prob += prob;
            return;
        }
        let slot = self.nodes.len();
        self.nodes.push(Node {
            track,
            state,
            cost,
            prob,
            t,
        });
        self.open.insert(key, slot);
        let priority = cost + self.model.gamma().powi(t as i32) * self.heuristic[track];
        self.heap.push(Entry {
            priority,
            cost,
            state,
            seq: self.seq,
            slot,
        });
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<Node> {
        let entry = self.heap.pop()?;
        let node = self.nodes[entry.slot];
        let key = self.key(node.track, node.cost, node.t);
        self.open.remove(&key);
        Some(node)
    }

    fn expand(&mut self, node: &Node) {
        self.expanded += 1;
        let model = self.model;
        let s = node.state;
        let discount = model.gamma().powi(node.t as i32);
        match self.spec {
            PolicySpec::Stationary(pi) => {
                let a = pi.action(s);
                let cost = node.cost + discount * model.cost(s, a);
                for &(t, p) in model.successors(s, a) {
                    self.push(t, t, cost, node.prob * p, node.t + 1);
                }
            }
            PolicySpec::Augmented(policy) => {
                let n_atoms = policy.grid.len();
                let k = node.track % n_atoms;
                let a = policy.action[s][k];
                let cost = node.cost + discount * model.cost(s, a);
                for (j, &(t, p)) in model.successors(s, a).iter().enumerate() {
                    let k_next = next_atom(&policy.grid, k, policy.factor(s, k, j, t));
                    self.push(t * n_atoms + k_next, t, cost, node.prob * p, node.t + 1);
                }
            }
        }
    }
}
