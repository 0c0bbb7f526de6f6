//! Resolving the model a command works on, from a model file or a domain spec.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use cvarlab_core::{
    make_gridworld, make_river, GridworldSpec, ModelFile, RiverSpec, SspMdp, StateId,
};
use serde::{Deserialize, Serialize};

use crate::Validation;

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Gridworld,
    River,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// Model JSON file.
    #[arg(long, conflicts_with = "domain")]
    pub model: Option<PathBuf>,
    /// Built-in benchmark domain.
    #[arg(long, value_enum)]
    pub domain: Option<Domain>,
    /// Domain spec JSON (same fields as the built-in spec types); needs `--domain`.
    #[arg(long, requires = "domain")]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    /// Seed for the obstacle layout and for Monte-Carlo rollouts.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ModelArgs {
    pub fn is_given(&self) -> bool {
        self.model.is_some() || self.domain.is_some()
    }

    pub fn mc_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn source(&self) -> anyhow::Result<ModelSource> {
        if let Some(path) = &self.model {
            if self.rows.is_some() || self.cols.is_some() {
                return Err(Validation("--rows/--cols only apply to --domain".into()).into());
            }
            return Ok(ModelSource::Model { path: path.clone() });
        }
        let Some(domain) = self.domain else {
            return Err(Validation("either --model or --domain is required".into()).into());
        };
        let text = match &self.spec {
            Some(p) => Some(
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            ),
            None => None,
        };
        match domain {
            Domain::Gridworld => {
                let mut spec: GridworldSpec = match text {
                    Some(t) => serde_json::from_str(&t).map_err(cvarlab_core::Error::from)?,
                    None => GridworldSpec::default(),
                };
                spec.rows = self.rows.unwrap_or(spec.rows);
                spec.cols = self.cols.unwrap_or(spec.cols);
                spec.seed = self.seed.unwrap_or(spec.seed);
                Ok(ModelSource::Gridworld(spec))
            }
            Domain::River => {
                let mut spec: RiverSpec = match text {
                    Some(t) => serde_json::from_str(&t).map_err(cvarlab_core::Error::from)?,
                    None => RiverSpec::default(),
                };
                spec.rows = self.rows.unwrap_or(spec.rows);
                spec.cols = self.cols.unwrap_or(spec.cols);
                Ok(ModelSource::River(spec))
            }
        }
    }
}

/// Where a model came from; stored in solution files so that later commands
/// can rebuild it without repeating the flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "lowercase")]
pub enum ModelSource {
    Gridworld(GridworldSpec),
    River(RiverSpec),
    Model { path: PathBuf },
}

pub struct LoadedModel {
    pub model: SspMdp,
    pub domain: &'static str,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    /// The domain's start state; state 0 for model files.
    pub start: StateId,
}

impl ModelSource {
    pub fn load(&self) -> anyhow::Result<LoadedModel> {
        Ok(match self {
            ModelSource::Gridworld(spec) => LoadedModel {
                model: make_gridworld(spec)?,
                domain: "gridworld",
                rows: Some(spec.rows),
                cols: Some(spec.cols),
                start: spec.start_state(),
            },
            ModelSource::River(spec) => LoadedModel {
                model: make_river(spec)?,
                domain: "river",
                rows: Some(spec.rows),
                cols: Some(spec.cols),
                start: spec.start_state(),
            },
            ModelSource::Model { path } => {
                let file =
                    ModelFile::read(path).with_context(|| format!("loading {}", path.display()))?;
                LoadedModel {
                    model: file.to_model()?,
                    domain: "model",
                    rows: None,
                    cols: None,
                    start: 0,
                }
            }
        })
    }
}
