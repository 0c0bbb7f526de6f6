//! Product chain over augmented states for a fixed augmented policy.

use super::{nearest_atom_log, AugmentedPolicy};
use crate::error::{Error, Result};
use crate::grid::AtomGrid;
use crate::ssp::{
    determinized_min_cost, eval::first_improper_state, policy_evaluation_neutral, SspBuilder,
    SspMdp, StateId, StationaryPolicy, ValueFunction,
};

/// Sweep tolerance for the risk-neutral value of extended chains.
pub const EXACT_EPSILON: f64 = 1e-12;

/// Single-action SSP over `S x Y` encoding a policy and its `xi` process.
#[derive(Clone, Debug)]
pub struct ExtendedMdp {
    pub mdp: SspMdp,
    pub n_atoms: usize,
    /// Original action taken in each augmented state.
    pub action_of: Vec<usize>,
}

impl ExtendedMdp {
    #[inline]
    pub fn index(&self, s: StateId, k: usize) -> usize {
        s * self.n_atoms + k
    }

    #[inline]
    pub fn split(&self, x: usize) -> (StateId, usize) {
        (x / self.n_atoms, x % self.n_atoms)
    }

    /// The unique policy of the product chain.
    pub fn policy(&self) -> StationaryPolicy {
        StationaryPolicy(vec![0; self.mdp.n_states()])
    }
}

/// Atom reached from atom `k` when a successor gets density factor `xi`.
///
/// A zero factor (successor outside the tail) snaps to the smallest atom.
#[inline]
pub fn next_atom(grid: &AtomGrid, k: usize, xi: f64) -> usize {
    let alpha = grid.atom(k) * xi;
    if alpha > 0.0 {
        nearest_atom_log(grid, alpha).unwrap_or(0)
    } else {
        0
    }
}

/// Builds `M^pi`: state `(s, y)` takes `pi(s, y)`, moves to `(s', snap(y xi))`
/// with the original probability and pays the original cost.
pub fn create_extended_mdp(model: &SspMdp, policy: &AugmentedPolicy) -> Result<ExtendedMdp> {
    let grid = &policy.grid;
    let n_atoms = grid.len();
    let n = model.n_states() * n_atoms;
    let mut b = SspBuilder::new(n, 1).gamma(model.gamma());
    let mut action_of = vec![0; n];
    for s in 0..model.n_states() {
        for k in 0..n_atoms {
            let x = s * n_atoms + k;
            if model.is_goal(s) {
                b.add_goal(x);
                b.set_action(x, 0, 0.0, vec![(x, 1.0)]);
                continue;
            }
            let a = policy.action[s][k];
            if !model.has_action(s, a) {
                return Err(Error::ImproperExtendedPolicy { state: s, atom: k });
            }
            action_of[x] = a;
            let next = model
                .successors(s, a)
                .iter()
                .enumerate()
                .map(|(j, &(t, p))| {
                    let factor = policy.factor(s, k, j, t);
                    (t * n_atoms + next_atom(grid, k, factor), p)
                })
                .collect();
            b.set_action(x, 0, model.cost(s, a), next);
        }
    }
    let ext = ExtendedMdp {
        mdp: b.build_unchecked(),
        n_atoms,
        action_of,
    };
    if let Some(x) = first_improper_state(&ext.mdp, &ext.policy()) {
        let (state, atom) = ext.split(x);
        return Err(Error::ImproperExtendedPolicy { state, atom });
    }
    Ok(ext)
}

/// Risk-neutral value and best-outcome value of every augmented state.
pub fn mdp_policy_evaluation(
    model: &SspMdp,
    policy: &AugmentedPolicy,
) -> Result<(ExtendedMdp, ValueFunction, ValueFunction)> {
    let ext = create_extended_mdp(model, policy)?;
    let pi = ext.policy();
    let mean = policy_evaluation_neutral(&ext.mdp, &pi, EXACT_EPSILON)?;
    let min = determinized_min_cost(&ext.mdp, &pi)?;
    Ok((ext, mean, min))
}
