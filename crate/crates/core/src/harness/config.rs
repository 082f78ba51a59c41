use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{InputAblation, TemplateConfig};
use crate::baselines::{FeatureResources, ForestConfig, SuffixTagger, WordList};
use crate::corpus::SynthConfig;
use crate::metrics::Grouping;
use crate::trainer::{TrainConfig, Variant};
use crate::{Error, Result};

/// A trained-model configuration compared in cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Approach {
    pub variant: Variant,
    pub input_ablation: InputAblation,
}

impl Approach {
    pub const fn new(variant: Variant, input_ablation: InputAblation) -> Self {
        Approach {
            variant,
            input_ablation,
        }
    }

    pub fn name(&self) -> String {
        format!("{}+{}", self.variant.name(), self.input_ablation.name())
    }

    pub fn train_config(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            variant: self.variant,
            input_ablation: self.input_ablation,
            ..base.clone()
        }
    }
}

pub const MAJORITY: &str = "majority";
pub const FEATURES: &str = "feature_forest";

/// The comparison grid: shared in-context plus the single-item and
/// multi-task configurations.
pub fn baseline_grid() -> Vec<Approach> {
    use InputAblation::*;
    use Variant::*;
    vec![
        Approach::new(PerItem, ResponseOnly),
        Approach::new(PerItem, ResponsePassageQuestion),
        Approach::new(PerItem, FullInContext),
        Approach::new(MultiTask, ResponsePassageQuestion),
        Approach::new(SharedInContext, FullInContext),
    ]
}

/// Unit paired in t-tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    PerItem,
    PerFold,
}

/// Everything a run needs. Relative paths resolve against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides the training and synthesis seeds when set.
    pub seed: Option<u64>,
    pub items: Option<PathBuf>,
    pub responses: Option<PathBuf>,
    pub folds: usize,
    pub template_file: Option<PathBuf>,
    pub template: TemplateConfig,
    pub train: TrainConfig,
    pub approaches: Vec<Approach>,
    /// Add the baseline grid to `approaches`.
    pub baseline_grid: bool,
    /// Run the majority and feature-forest baselines.
    pub classical_baselines: bool,
    /// Approach the t-tests compare against.
    pub reference: String,
    pub pairing: Pairing,
    pub grouping: Grouping,
    pub forest: ForestConfig,
    pub stopwords_file: Option<PathBuf>,
    pub easy_words_file: Option<PathBuf>,
    pub lexicon_file: Option<PathBuf>,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            items: None,
            responses: None,
            folds: 5,
            template_file: None,
            template: TemplateConfig::default(),
            train: TrainConfig::default(),
            approaches: vec![Approach::new(
                Variant::SharedInContext,
                InputAblation::FullInContext,
            )],
            baseline_grid: false,
            classical_baselines: true,
            reference: Approach::new(Variant::PerItem, InputAblation::ResponseOnly).name(),
            pairing: Pairing::PerItem,
            grouping: Grouping::Combined,
            forest: ForestConfig::default(),
            stopwords_file: None,
            easy_words_file: None,
            lexicon_file: None,
            synth: SynthConfig::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.items,
            &mut cfg.responses,
            &mut cfg.template_file,
            &mut cfg.stopwords_file,
            &mut cfg.easy_words_file,
            &mut cfg.lexicon_file,
        ] {
            resolve(base, p);
        }
        if let Some(t) = &cfg.template_file {
            cfg.template = TemplateConfig::load(t)?;
        }
        Ok(cfg)
    }

    /// Apply the seed override and validate.
    pub fn finalize(mut self) -> Result<Self> {
        if let Some(s) = self.seed {
            self.train.seed = s;
            self.synth.seed = s;
        }
        if self.folds < 3 {
            return Err(Error::Config(
                "folds: need at least 3 (train, validation, test)".into(),
            ));
        }
        self.template.validate()?;
        self.train.validate()?;
        Ok(self)
    }

    /// Approaches to train, deduplicated, in a fixed order.
    pub fn all_approaches(&self) -> Vec<Approach> {
        let mut v = self.approaches.clone();
        if self.baseline_grid {
            v.extend(baseline_grid());
        }
        let mut seen = std::collections::BTreeSet::new();
        v.retain(|a| seen.insert(*a));
        v
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn feature_resources(&self) -> Result<FeatureResources> {
        let mut r = FeatureResources::default();
        if let Some(p) = &self.stopwords_file {
            r.stopwords = WordList::load(p)?;
        }
        if let Some(p) = &self.easy_words_file {
            r.easy_words = WordList::load(p)?;
        }
        if let Some(p) = &self.lexicon_file {
            r.tagger = Box::new(SuffixTagger::default().with_lexicon_file(p)?);
        }
        Ok(r)
    }

    pub fn corpus_paths(&self) -> Result<(&Path, &Path)> {
        match (&self.items, &self.responses) {
            (Some(i), Some(r)) => Ok((i, r)),
            _ => Err(Error::Config(
                "items and responses paths are required".into(),
            )),
        }
    }
}
