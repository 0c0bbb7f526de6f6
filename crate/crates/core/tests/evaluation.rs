mod common;

use common::*;
use cvarlab_core::{
    create_extended_mdp, make_gridworld, mdp_policy_evaluation, run_forpecvar, run_vili, run_viq,
    AtomGrid, AugmentedPolicy, Error, EvalResult, ForpecvarConfig, GridworldSpec, LowerTail,
    PolicySpec, SolverConfig, SspBuilder, StationaryPolicy, TracePoint,
};

fn cfg() -> SolverConfig {
    SolverConfig::with_epsilon(1e-9)
}

#[test]
fn extended_gridworld_has_product_size() {
    let model = make_gridworld(&GridworldSpec::new(5, 5)).unwrap();
    let grid = AtomGrid::log_spaced(0.01, 7).unwrap();
    let policy = AugmentedPolicy::from(&run_vili(&model, &grid, &cfg()).unwrap());
    let ext = create_extended_mdp(&model, &policy).unwrap();
    assert_eq!(ext.mdp.n_states(), 175);
    assert_eq!(ext.mdp.goals().len(), 7);
    for x in 0..175 {
        let (s, _) = ext.split(x);
        assert_eq!(
            ext.mdp.cost(x, 0),
            if model.is_goal(s) {
                0.0
            } else {
                model.cost(s, ext.action_of[x])
            }
        );
    }
}

#[test]
fn extended_two_trajectory_keeps_the_mean() {
    let model = two_trajectory(0.1);
    let grid = AtomGrid::from_atoms(vec![0.1, 0.2, 1.0]).unwrap();
    let sol = run_viq(&model, &grid, &cfg()).unwrap();
    let policy = AugmentedPolicy::from_quantile(&model, &sol, LowerTail::Origin);
    let (ext, mean, min) = mdp_policy_evaluation(&model, &policy).unwrap();
    for k in 0..3 {
        assert!((mean[ext.index(0, k)] - 10.9).abs() < 1e-12);
        assert_eq!(min[ext.index(0, k)], 1.0);
        assert_eq!(mean[ext.index(2, k)], 0.0);
    }
    // from (s0, 0.2): all of the expensive branch and half the tail from the cheap one
    let xi = &policy.xi[0][1];
    assert_eq!((xi[0].0, xi[1].0), (1, 2));
    assert!((xi[0].1 - 5.0).abs() < 1e-12, "{xi:?}");
    assert!((xi[1].1 - 0.1 / (0.9 * 0.2)).abs() < 1e-12, "{xi:?}");
}

#[test]
fn two_trajectory_examples_and_json() {
    let model = two_trajectory(0.1);
    let pi = StationaryPolicy(vec![0, 0, 0]);
    let run = |alpha| {
        run_forpecvar(
            &model,
            PolicySpec::Stationary(&pi),
            0,
            alpha,
            None,
            &ForpecvarConfig::default(),
        )
        .unwrap()
    };
    let r = run(0.2);
    assert!((r.cvar - 50.5).abs() < 1e-9);
    assert_eq!(r.var, 1.0);
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["trace"][0][0], 1.0);
    assert!(json.get("expanded").is_none());
    let back: EvalResult = serde_json::from_value(json).unwrap();
    assert_eq!(back.trace, r.trace);
    assert_eq!((run(0.1).cvar, run(0.1).var), (100.0, 1.0));
    let r = run(0.05);
    assert!((r.cvar - 100.0).abs() < 1e-9);
    assert_eq!(r.var, 100.0);
    assert_eq!(r.trace.last(), Some(&TracePoint(100.0, 0.0, 100.0)));
}

#[test]
fn augmented_policy_matches_solver_on_two_trajectory() {
    let model = two_trajectory(0.1);
    let grid = AtomGrid::from_atoms(vec![0.1, 0.2, 1.0]).unwrap();
    let sol = run_vili(&model, &grid, &cfg()).unwrap();
    let policy = AugmentedPolicy::from(&sol);
    for (k, &y) in grid.atoms().iter().enumerate() {
        let r = run_forpecvar(
            &model,
            PolicySpec::Augmented(&policy),
            0,
            y,
            None,
            &ForpecvarConfig::default(),
        )
        .unwrap();
        assert!(
            (r.cvar - sol.value[0][k]).abs() < 1e-6,
            "y={y}: {} vs {}",
            r.cvar,
            sol.value[0][k]
        );
    }
}

#[test]
fn discounted_costs_are_accumulated_per_stage() {
    // s0 -1-> s1 -1-> g, discounted by 0.5: total 1.5
    let model = SspBuilder::new(3, 1)
        .gamma(0.5)
        .goal(2)
        .action(0, 0, 1.0, &[(1, 1.0)])
        .action(1, 0, 1.0, &[(2, 1.0)])
        .build()
        .unwrap();
    let pi = StationaryPolicy(vec![0, 0, 0]);
    let r = run_forpecvar(
        &model,
        PolicySpec::Stationary(&pi),
        0,
        0.3,
        None,
        &ForpecvarConfig::default(),
    )
    .unwrap();
    assert!((r.cvar - 1.5).abs() < 1e-12);
    let dist = trajectory_distribution(&model, &pi, 0, 1e-18);
    assert_eq!(dist.support(), &[1.5]);
}

#[test]
fn improper_policies_are_reported() {
    // state 1 loops on itself forever under action 0
    let model = SspBuilder::new(3, 2)
        .goal(2)
        .action(0, 0, 1.0, &[(1, 0.5), (2, 0.5)])
        .action(1, 0, 1.0, &[(1, 1.0)])
        .action(1, 1, 1.0, &[(2, 1.0)])
        .build()
        .unwrap();
    let pi = StationaryPolicy(vec![0, 0, 0]);
    let err = run_forpecvar(
        &model,
        PolicySpec::Stationary(&pi),
        0,
        0.1,
        None,
        &ForpecvarConfig::default(),
    );
    assert!(matches!(err, Err(Error::ImproperPolicy(_))), "{err:?}");
}

#[test]
fn stalled_search_hits_the_node_budget() {
    let model = two_trajectory(0.1);
    let pi = StationaryPolicy(vec![0, 0, 0]);
    let ev = cvarlab_core::Evaluator::new(
        &model,
        PolicySpec::Stationary(&pi),
        ForpecvarConfig {
            node_budget: 0,
            ..ForpecvarConfig::default()
        },
    )
    .unwrap();
    assert!(matches!(
        ev.evaluate(0, 0.05, cvarlab_core::Heuristic::Zero),
        Err(Error::ImproperPolicy(_))
    ));
}
