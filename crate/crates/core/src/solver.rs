//! Settings shared by the CVaR value-iteration solvers.

use serde::{Deserialize, Serialize};

use crate::risk::{is_tie, LowerTail};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop once the sup-norm change of `V(s, y)` over all atoms is at most this.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub lower_tail: LowerTail,
    /// Back up states in parallel within an iteration.
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            max_iterations: 1_000_000,
            lower_tail: LowerTail::Origin,
            parallel: true,
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }
}

/// Which solver produced a solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Vili,
    Viq,
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Vili => "vili",
            SolverKind::Viq => "viq",
        })
    }
}

impl std::str::FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "vili" => Ok(SolverKind::Vili),
            "viq" => Ok(SolverKind::Viq),
            _ => Err(format!("unknown solver '{s}' (expected vili or viq)")),
        }
    }
}

pub(crate) fn sup_change(old: &[Vec<f64>], new: &[Vec<f64>]) -> f64 {
    old.iter()
        .zip(new)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// Minimum of `q` and the first index whose value ties with it.
///
/// Near-equal Q-values arise from floating-point noise between algebraically
/// equal backups; resolving them to the lowest action keeps both solvers on
/// the same policy.
pub(crate) fn argmin_with_ties(q: impl Iterator<Item = f64> + Clone) -> (f64, usize) {
    let best = q.clone().fold(f64::INFINITY, f64::min);
    let idx = q.clone().position(|v| is_tie(v, best)).unwrap_or(0);
    (best, idx)
}

/// Runs `f` over `0..n`, in parallel when asked.
pub(crate) fn map_states<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if parallel {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}
