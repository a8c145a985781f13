//! Versioned JSON persistence for fitted models of every engine.
//!
//! Floating-point values are written in shortest round-trip form, so a
//! loaded model predicts exactly like the one that was saved.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adaboost::AdaBoostModel;
use crate::data::{LabelMap, RNG_ALGORITHM};
use crate::gradboost::BoostModel;
use crate::likboost::{LikBoostModel, LikEngine};
use crate::{BoostError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", content = "model", rename_all = "lowercase")]
pub enum Payload {
    Gradient(BoostModel),
    Likelihood(LikBoostModel),
    AdaBoost(AdaBoostModel),
}

impl Payload {
    pub fn engine_id(&self) -> &'static str {
        match self {
            Payload::Gradient(_) => "gradient",
            Payload::Likelihood(m) => match m.engine {
                LikEngine::Glm(_) => "likelihood-glm",
                LikEngine::Cox => "likelihood-cox",
            },
            Payload::AdaBoost(_) => "adaboost",
        }
    }

    pub fn family_id(&self) -> String {
        match self {
            Payload::Gradient(m) => m.family.id().to_string(),
            Payload::Likelihood(m) => match m.engine {
                LikEngine::Glm(f) => f.to_string(),
                LikEngine::Cox => "cox".into(),
            },
            Payload::AdaBoost(_) => "exponential".into(),
        }
    }

    pub fn names(&self) -> &[String] {
        match self {
            Payload::Gradient(m) => &m.names,
            Payload::Likelihood(m) => &m.names,
            Payload::AdaBoost(m) => &m.names,
        }
    }

    /// Component name selected at each iteration.
    pub fn selected_names(&self) -> Vec<String> {
        let names = self.names();
        match self {
            Payload::Gradient(m) => m.path.iter().map(|s| names[s.component].clone()).collect(),
            Payload::Likelihood(m) => m.path.iter().map(|s| names[s.component].clone()).collect(),
            Payload::AdaBoost(m) => m.rounds.iter().map(|r| names[r.stump.component].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metadata {
    pub tool_version: String,
    pub seed: Option<u64>,
    pub rng: String,
    /// Command line that produced the model.
    pub invocation: Vec<String>,
    pub label_map: Option<LabelMap>,
}

impl Metadata {
    pub fn new(seed: Option<u64>, invocation: Vec<String>, label_map: Option<LabelMap>) -> Self {
        Metadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            rng: RNG_ALGORITHM.to_string(),
            invocation,
            label_map,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub engine: String,
    pub family: String,
    pub metadata: Metadata,
    /// Component selected at each iteration, by name.
    pub selected: Vec<String>,
    pub payload: Payload,
}

impl ModelFile {
    pub fn new(payload: Payload, metadata: Metadata) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            engine: payload.engine_id().to_string(),
            family: payload.family_id(),
            metadata,
            selected: payload.selected_names(),
            payload,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| BoostError::ModelFile(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| BoostError::ModelFile(e.to_string()))?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => return Err(BoostError::ModelFile(format!("unsupported format version {v}"))),
            None => return Err(BoostError::ModelFile("missing format_version".into())),
        }
        serde_json::from_value(value).map_err(|e| BoostError::ModelFile(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n")
            .map_err(|source| BoostError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| BoostError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }
}
