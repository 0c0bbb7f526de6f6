//! JSON model files.
//!
//! ```json
//! {"states": 3, "actions": 1, "goals": [2], "gamma": 1.0,
//!  "transitions": [{"s": 0, "a": 0, "next": [[2, "0.9"], [1, 0.1]]}],
//!  "costs": [{"s": 0, "a": 0, "c": 1}]}
//! ```
//!
//! Probabilities may be JSON numbers or decimal strings.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use super::{SspBuilder, SspMdp, StateId};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub states: usize,
    pub actions: usize,
    pub goals: Vec<StateId>,
    #[serde(default = "unit_gamma")]
    pub gamma: f64,
    pub transitions: Vec<TransitionEntry>,
    #[serde(default)]
    pub costs: Vec<CostEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
}

fn unit_gamma() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub s: StateId,
    pub a: usize,
    pub next: Vec<Outcome>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Outcome(
    pub StateId,
    #[serde(deserialize_with = "number_or_string")] pub f64,
);

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CostEntry {
    pub s: StateId,
    pub a: usize,
    #[serde(deserialize_with = "number_or_string")]
    pub c: f64,
}

fn number_or_string<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Num {
        F(f64),
        S(String),
    }
    match Num::deserialize(d)? {
        Num::F(x) => Ok(x),
        Num::S(s) => s.trim().parse().map_err(serde::de::Error::custom),
    }
}

impl ModelFile {
    pub fn from_model(model: &SspMdp) -> Self {
        let mut transitions = Vec::new();
        let mut costs = Vec::new();
        for s in 0..model.n_states() {
            for a in model.actions(s) {
                transitions.push(TransitionEntry {
                    s,
                    a,
                    next: model
                        .successors(s, a)
                        .iter()
                        .map(|&(n, p)| Outcome(n, p))
                        .collect(),
                });
                if model.cost(s, a) != 0.0 {
                    costs.push(CostEntry {
                        s,
                        a,
                        c: model.cost(s, a),
                    });
                }
            }
        }
        Self {
            states: model.n_states(),
            actions: model.n_actions(),
            goals: model.goals().to_vec(),
            gamma: model.gamma(),
            transitions,
            costs,
            names: model.names.clone(),
        }
    }

    /// Builds the raw model without validation, so that callers can report
    /// every violation. Out-of-range ids are an immediate error.
    pub fn to_builder(&self) -> Result<SspBuilder> {
        let range = |s: StateId, a: usize| {
            if s >= self.states || a >= self.actions {
                Err(Error::InvalidArgument(format!(
                    "entry (s={s}, a={a}) out of range"
                )))
            } else {
                Ok(())
            }
        };
        let mut b = SspBuilder::new(self.states, self.actions).gamma(self.gamma);
        for &g in &self.goals {
            b.add_goal(g);
        }
        if let Some(names) = &self.names {
            b = b.names(names.clone());
        }
        for t in &self.transitions {
            range(t.s, t.a)?;
            b.transitions[t.s][t.a] = t.next.iter().map(|o| (o.0, o.1)).collect();
        }
        for c in &self.costs {
            range(c.s, c.a)?;
            b.set_cost(c.s, c.a, c.c);
        }
        Ok(b)
    }

    pub fn to_model(&self) -> Result<SspMdp> {
        self.to_builder()?.build()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
