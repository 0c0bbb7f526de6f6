//! CVaR value iteration with linear interpolation of `y V(s, y)` over the
//! atom grid. Each backup solves one envelope problem per `(s, y, a)`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::AtomGrid;
use crate::risk::{maximize_risk_envelope, LowerTail, PwlYcvar};
use crate::solver::{argmin_with_ties, map_states, sup_change, SolverConfig};
use crate::ssp::{ActionId, SspMdp, StateId};

/// Values, greedy actions and envelope maximizers on `S x Y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedSolution {
    pub grid: AtomGrid,
    /// `value[s][k] = V(s, y_k)`.
    pub value: Vec<Vec<f64>>,
    pub policy: Vec<Vec<ActionId>>,
    /// `xi[s][k]`: `(s', xi)` for the successors of the chosen action.
    pub xi: Vec<Vec<Vec<(StateId, f64)>>>,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub residual: f64,
}

impl AugmentedSolution {
    /// `V = 0` everywhere, first available action, no maximizers yet.
    pub fn initial(model: &SspMdp, grid: &AtomGrid) -> Self {
        let n = grid.len();
        Self {
            grid: grid.clone(),
            value: vec![vec![0.0; n]; model.n_states()],
            policy: (0..model.n_states())
                .map(|s| vec![model.actions(s).next().unwrap_or(0); n])
                .collect(),
            xi: vec![vec![Vec::new(); n]; model.n_states()],
            iterations: 0,
            residual: f64::INFINITY,
        }
    }
}

/// One application of the interpolated Bellman operator `T_I`.
pub fn vili_backup(
    model: &SspMdp,
    current: &AugmentedSolution,
    cfg: &SolverConfig,
) -> AugmentedSolution {
    let grid = &current.grid;
    let tail = cfg.lower_tail;
    let curves: Vec<PwlYcvar> = current
        .value
        .iter()
        .map(|row| PwlYcvar::from_values(grid.atoms(), row))
        .collect();

    let rows = map_states(model.n_states(), cfg.parallel, |s| {
        if model.is_goal(s) {
            let n = grid.len();
            return (vec![0.0; n], current.policy[s].clone(), vec![Vec::new(); n]);
        }
        backup_state(model, s, grid, &curves, tail)
    });

    let mut next = AugmentedSolution {
        grid: grid.clone(),
        value: Vec::with_capacity(rows.len()),
        policy: Vec::with_capacity(rows.len()),
        xi: Vec::with_capacity(rows.len()),
        iterations: current.iterations + 1,
        residual: 0.0,
    };
    for (v, p, x) in rows {
        next.value.push(v);
        next.policy.push(p);
        next.xi.push(x);
    }
    next.residual = sup_change(&current.value, &next.value);
    next
}

#[allow(clippy::type_complexity)]
fn backup_state(
    model: &SspMdp,
    s: StateId,
    grid: &AtomGrid,
    curves: &[PwlYcvar],
    tail: LowerTail,
) -> (Vec<f64>, Vec<ActionId>, Vec<Vec<(StateId, f64)>>) {
    let gamma = model.gamma();
    let n = grid.len();
    let mut values = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n);
    let mut xis = Vec::with_capacity(n);
    for &y in grid.atoms() {
        let candidates: Vec<(f64, ActionId, Vec<(StateId, f64)>)> = model
            .actions(s)
            .map(|a| {
                let succ = model.successors(s, a);
                let args: Vec<(f64, &PwlYcvar)> =
                    succ.iter().map(|&(t, p)| (p, &curves[t])).collect();
                let sol = maximize_risk_envelope(y, &args, tail);
                let xi = succ.iter().zip(sol.xi).map(|(&(t, _), x)| (t, x)).collect();
                (model.cost(s, a) + gamma * sol.value, a, xi)
            })
            .collect();
        let (q, i) = argmin_with_ties(candidates.iter().map(|c| c.0));
        let (_, a, xi) = candidates
            .into_iter()
            .nth(i)
            .expect("non-goal state without actions");
        values.push(q);
        actions.push(a);
        xis.push(xi);
    }
    (values, actions, xis)
}

/// Iterates [`vili_backup`] from `V = 0` until the sup-norm change is at most
/// `cfg.epsilon`.
pub fn run_vili(model: &SspMdp, grid: &AtomGrid, cfg: &SolverConfig) -> Result<AugmentedSolution> {
    if model.gamma() >= 1.0 {
        crate::ssp::eval::ensure_goal_reachable(model)?;
    }
    let mut sol = AugmentedSolution::initial(model, grid);
    let start = Instant::now();
    while sol.iterations < cfg.max_iterations {
        let t = Instant::now();
        sol = vili_backup(model, &sol, cfg);
        log::debug!(
            "vili iteration {} change {:.3e} took {:?}",
            sol.iterations,
            sol.residual,
            t.elapsed()
        );
        if sol.residual <= cfg.epsilon {
            log::info!(
                "vili converged in {} iterations ({:?})",
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssp::fixtures::*;

    fn cfg() -> SolverConfig {
        SolverConfig {
            epsilon: 1e-9,
            parallel: false,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn goal_rows_stay_zero_and_deterministic_step_costs_once() {
        let m = chain(5.0);
        let grid = AtomGrid::log_spaced(0.1, 4).unwrap();
        let once = vili_backup(&m, &AugmentedSolution::initial(&m, &grid), &cfg());
        assert!(once.value[0].iter().all(|&v| (v - 5.0).abs() < 1e-12));
        assert!(once.value[1].iter().all(|&v| v == 0.0));
        assert!(once.xi[0]
            .iter()
            .all(|x| x.len() == 1 && (x[0].1 - 1.0).abs() < 1e-12));
    }

    #[test]
    fn chain_converges_to_step_cost() {
        let m = chain(5.0);
        let sol = run_vili(&m, &AtomGrid::log_spaced(0.01, 7).unwrap(), &cfg()).unwrap();
        assert!(sol.value[0].iter().all(|&v| (v - 5.0).abs() < 1e-9));
    }

    #[test]
    fn two_trajectory_values_match_exact_cvar() {
        let m = two_trajectory();
        let grid = AtomGrid::from_atoms(vec![0.1, 0.2, 1.0]).unwrap();
        let sol = run_vili(&m, &grid, &cfg()).unwrap();
        let want = [100.0, 50.5, 10.9];
        for (got, want) in sol.value[0].iter().zip(want) {
            assert!((got - want).abs() < 1e-6, "{:?}", sol.value[0]);
        }
    }

    #[test]
    fn parallel_and_serial_backups_agree() {
        let m = two_trajectory();
        let grid = AtomGrid::log_spaced(0.05, 5).unwrap();
        let a = run_vili(&m, &grid, &cfg()).unwrap();
        let b = run_vili(
            &m,
            &grid,
            &SolverConfig {
                parallel: true,
                ..cfg()
            },
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let m = self_loop();
        let grid = AtomGrid::log_spaced(0.1, 3).unwrap();
        let cfg = SolverConfig {
            max_iterations: 3,
            ..cfg()
        };
        assert!(matches!(
            run_vili(&m, &grid, &cfg),
            Err(Error::NonConvergence { iterations: 3, .. })
        ));
    }
}
