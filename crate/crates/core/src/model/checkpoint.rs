use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{Hyperparams, ModelParams};
use super::train::TrainedModel;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

/// On-disk JSON form of a [`TrainedModel`]. Parameters are stored as named,
/// row-major flat arrays; floats round-trip bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub hyper: Hyperparams,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    pub positive_cluster: usize,
    pub params: Vec<NamedBlock>,
    pub loss_trace: Vec<f64>,
}

impl From<&TrainedModel> for Checkpoint {
    fn from(m: &TrainedModel) -> Self {
        let params = m
            .params
            .layout()
            .into_iter()
            .map(|b| NamedBlock {
                name: b.name.to_string(),
                rows: b.rows,
                cols: b.cols,
                values: m.params.values[b.range()].to_vec(),
            })
            .collect();
        Self {
            version: CHECKPOINT_VERSION,
            hyper: m.hyper.clone(),
            n_features: m.params.n_features,
            feature_names: m.feature_names.clone(),
            positive_cluster: m.positive_cluster,
            params,
            loss_trace: m.loss_trace.clone(),
        }
    }
}

impl Checkpoint {
    pub fn into_model(self) -> Result<TrainedModel> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion(self.version));
        }
        let h = &self.hyper;
        let mut params = ModelParams::zeros(h.variant, self.n_features, h.d_k, h.d_f);
        let layout = params.layout();
        if layout.len() != self.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "checkpoint has {} parameter blocks, {} expects {}",
                self.params.len(),
                h.variant,
                layout.len()
            )));
        }
        for (block, stored) in layout.iter().zip(&self.params) {
            if block.name != stored.name
                || block.rows != stored.rows
                || block.cols != stored.cols
                || stored.values.len() != block.len()
            {
                return Err(Error::ShapeMismatch(format!(
                    "block `{}` ({}x{}) does not match expected `{}` ({}x{})",
                    stored.name, stored.rows, stored.cols, block.name, block.rows, block.cols
                )));
            }
            params.values[block.range()].copy_from_slice(&stored.values);
        }
        Ok(TrainedModel {
            params,
            loss_trace: self.loss_trace,
            hyper: self.hyper,
            positive_cluster: self.positive_cluster,
            feature_names: self.feature_names,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        Self::from_json(&std::fs::read_to_string(path)?)?.into_model()
    }
}
