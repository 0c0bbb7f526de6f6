use thiserror::Error;

use crate::ssp::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("model failed validation with {} violation(s): {}", .0.len(), first_violation(.0))]
    InvalidModel(Vec<Violation>),

    #[error("policy is improper: {0}")]
    ImproperPolicy(String),

    #[error("no proper policy exists: state {0} cannot reach a goal under any action")]
    NoProperPolicy(usize),

    #[error(
        "value iteration did not converge after {iterations} iterations (last change {residual:e})"
    )]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("yCVaR slopes increase from {left} to {right} at segment {segment}")]
    ConcavityViolation {
        segment: usize,
        left: f64,
        right: f64,
    },

    #[error("confidence level {0} cannot be snapped to an atom")]
    DegenerateAlpha(f64),

    #[error(
        "extended policy is improper: augmented state (s={state}, atom {atom}) cannot reach a goal"
    )]
    ImproperExtendedPolicy { state: usize, atom: usize },

    #[error("{failures} of {samples} rollouts exceeded the step limit")]
    TooManyFailures { failures: usize, samples: usize },

    #[error("invalid domain spec: {0}")]
    InvalidSpec(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn first_violation(v: &[Violation]) -> String {
    v.first().map(|v| v.to_string()).unwrap_or_default()
}

pub type Result<T> = std::result::Result<T, Error>;
