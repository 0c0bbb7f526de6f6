//! Shared benchmark fixtures.

use cvarlab_core::{make_gridworld, AtomGrid, GridworldSpec, SolverConfig, SspMdp};

/// Seed-0 gridworld of the given size.
pub fn gridworld(rows: usize, cols: usize) -> SspMdp {
    make_gridworld(&GridworldSpec::new(rows, cols)).expect("benchmark gridworld")
}

pub fn grid(alpha0: f64, atoms: usize) -> AtomGrid {
    AtomGrid::log_spaced(alpha0, atoms).expect("benchmark grid")
}

/// The solver settings used throughout the experiments.
pub fn solver_config() -> SolverConfig {
    SolverConfig::with_epsilon(1e-3)
}
