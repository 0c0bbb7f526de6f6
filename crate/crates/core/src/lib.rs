//! CVaR planning for stochastic shortest path problems.
//!
//! The crate provides two approximate CVaR value-iteration solvers over a
//! grid of confidence levels ([`run_vili`], [`run_viq`]), an exact
//! best-first evaluator for the resulting policies ([`run_forpecvar`]), a
//! Monte-Carlo baseline ([`simulate_policy`]) and generators for the
//! gridworld and river benchmark families.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domains;
pub mod error;
pub mod forpecvar;
pub mod grid;
pub mod mc;
pub mod risk;
pub mod solver;
pub mod ssp;
pub mod vili;
pub mod viq;

pub use domains::{make_gridworld, make_river, GridworldSpec, RiverSpec};
pub use error::{Error, Result};
pub use forpecvar::{
    create_extended_mdp, mdp_policy_evaluation, nearest_atom_log, run_forpecvar, AugmentedPolicy,
    EvalResult, Evaluator, ExtendedMdp, ForpecvarConfig, Heuristic, PolicySpec, TracePoint,
};
pub use grid::AtomGrid;
pub use mc::{mc_cvar_estimate, simulate_policy, McConfig, McResult};
pub use risk::{cvar, maximize_risk_envelope, var, DiscreteDistribution, LowerTail, PwlYcvar};
pub use solver::{SolverConfig, SolverKind};
pub use ssp::{
    is_proper, policy_evaluation_neutral, validate_ssp, value_iteration_neutral, ActionId,
    ModelFile, SspBuilder, SspMdp, StateId, StationaryPolicy, ValueFunction,
};
pub use vili::{run_vili, AugmentedSolution};
pub use viq::{run_viq, QuantileSolution};
