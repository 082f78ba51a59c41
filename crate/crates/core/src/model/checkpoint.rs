use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params_digest;
use super::scorer::{ModelLayout, ScoringModel};
use super::transformer::EncoderConfig;
use crate::assembly::{InputAblation, PoolEntry, TemplateConfig};
use crate::corpus::Item;
use crate::textprep::PassageMode;
use crate::trainer::{TrainConfig, Variant};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// How to rebuild the frozen passage encoder; `digest` pins its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenSpec {
    pub config: EncoderConfig,
    pub seed: u64,
    pub mode: PassageMode,
    pub digest: String,
}

/// One trained model and the items it serves (empty means every item).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredModel {
    pub items: Vec<String>,
    pub layout: ModelLayout,
    pub head_items: Vec<String>,
    pub params: Vec<f64>,
    pub digest: String,
}

impl StoredModel {
    pub fn from_model(items: Vec<String>, model: &ScoringModel) -> Self {
        StoredModel {
            items,
            layout: model.layout().clone(),
            head_items: model.head_items(),
            params: model.params.clone(),
            digest: params_digest(&model.params),
        }
    }

    pub fn to_model(&self) -> Result<ScoringModel> {
        if params_digest(&self.params) != self.digest {
            return Err(Error::Checkpoint("parameter digest mismatch".into()));
        }
        ScoringModel::from_parts(
            self.layout.clone(),
            self.params.clone(),
            self.head_items.clone(),
        )
    }
}

/// Everything needed to score new responses without the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub variant: Variant,
    pub ablation: InputAblation,
    pub models: Vec<StoredModel>,
    pub vocab: Vec<String>,
    pub template: TemplateConfig,
    pub template_hash: String,
    pub frozen: FrozenSpec,
    /// Training responses per item, drawn from at inference as examples.
    pub pool: BTreeMap<String, Vec<PoolEntry>>,
    /// Word frequencies for spell correction; absent when it was off.
    pub spell_dictionary: Option<BTreeMap<String, u64>>,
    pub items: Vec<Item>,
    pub train_config: TrainConfig,
    pub config_hash: String,
    pub seed: u64,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        ck.verify()?;
        Ok(ck)
    }

    pub fn verify(&self) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        if self.template.hash() != self.template_hash {
            return Err(Error::Checkpoint("template hash mismatch".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Checkpoint("checkpoint holds no model".into()));
        }
        Ok(())
    }

    /// Reject a template that differs from the one used in training.
    pub fn check_template(&self, template: &TemplateConfig) -> Result<()> {
        if template.hash() != self.template_hash {
            return Err(Error::Checkpoint(
                "template differs from the one the checkpoint was trained with".into(),
            ));
        }
        Ok(())
    }

    /// Rebuilt models, each with the items it serves.
    pub fn models(&self) -> Result<Vec<(Vec<String>, ScoringModel)>> {
        self.models
            .iter()
            .map(|m| Ok((m.items.clone(), m.to_model()?)))
            .collect()
    }
}
