//! Training procedures: the shared in-context model meta-trained on the union
//! of all items, independent per-item models, and the multi-task model with
//! one head per item. All three run the same mini-batch loop with early
//! stopping and expose the same prediction path.

mod config;
mod fit;
mod pipeline;

pub use config::{EncoderShape, FrozenConfig, Monitor, TrainConfig};
pub use fit::{early_stop, predict_targets, TrainReport};
pub use pipeline::{Pipeline, Target};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assembly::TemplateConfig;
use crate::corpus::{FoldPlan, Item, Response, Rotation};
use crate::model::{Checkpoint, EnsemblePrediction, ScoringModel, StoredModel, CHECKPOINT_VERSION};
use crate::textprep::{DictionaryChecker, Tokenizer};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    PerItem,
    MultiTask,
    SharedInContext,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::PerItem => "per_item",
            Variant::MultiTask => "multi_task",
            Variant::SharedInContext => "shared_in_context",
        }
    }
}

/// Responses of one rotation, by role.
#[derive(Debug, Clone, Default)]
pub struct Split<'a> {
    pub train: Vec<&'a Response>,
    pub validation: Vec<&'a Response>,
    pub test: Vec<&'a Response>,
}

pub fn split<'a>(
    responses: &'a [Response],
    folds: &FoldPlan,
    rotation: Rotation,
) -> Result<Split<'a>> {
    let mut s = Split::default();
    for r in responses {
        let fold = folds
            .fold_of(&r.response_id)
            .ok_or_else(|| Error::Reference(format!("response {} has no fold", r.response_id)))?;
        if fold == rotation.test {
            s.test.push(r);
        } else if fold == rotation.validation {
            s.validation.push(r);
        } else {
            s.train.push(r);
        }
    }
    Ok(s)
}

/// A scored response with its averaged distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredResponse {
    pub response_id: String,
    pub item_id: String,
    pub prediction: EnsemblePrediction,
    pub conditioned: bool,
}

/// Trained models plus the fitted text pipeline that feeds them.
#[derive(Clone)]
pub struct TrainedScorer {
    pub variant: Variant,
    pub config: TrainConfig,
    pub pipeline: Pipeline,
    /// Each model with the items it serves; an empty list serves all.
    pub models: Vec<(Vec<String>, ScoringModel)>,
    pub reports: BTreeMap<String, TrainReport>,
}

impl TrainedScorer {
    pub fn model_for(&self, item_id: &str) -> Result<&ScoringModel> {
        self.models
            .iter()
            .find(|(items, _)| items.is_empty() || items.iter().any(|i| i == item_id))
            .map(|(_, m)| m)
            .ok_or_else(|| Error::Reference(format!("no trained model for item {item_id}")))
    }

    /// Parameter count summed over all stored models.
    pub fn total_parameters(&self) -> usize {
        self.models.iter().map(|(_, m)| m.n_params()).sum()
    }

    /// Predict with `resamples` example draws per response.
    pub fn predict(
        &self,
        responses: &[&Response],
        resamples: usize,
        condition: bool,
    ) -> Result<Vec<ScoredResponse>> {
        let base = seed::derive(self.config.seed, &[seed::label("predict")]);
        responses
            .iter()
            .map(|r| {
                let target = self.pipeline.target(r, condition)?;
                let model = self.model_for(&r.item_id)?;
                let mut pred = predict_targets(
                    model,
                    &self.pipeline,
                    std::slice::from_ref(&target),
                    resamples,
                    base,
                )?;
                Ok(ScoredResponse {
                    response_id: r.response_id.clone(),
                    item_id: r.item_id.clone(),
                    prediction: pred.remove(0),
                    conditioned: target.prefix.is_some(),
                })
            })
            .collect()
    }

    pub fn to_checkpoint(&self, config_hash: &str) -> Checkpoint {
        let template = self.pipeline.template().clone();
        Checkpoint {
            version: CHECKPOINT_VERSION,
            variant: self.variant,
            ablation: self.pipeline.ablation,
            models: self
                .models
                .iter()
                .map(|(items, m)| StoredModel::from_model(items.clone(), m))
                .collect(),
            vocab: self.pipeline.tokenizer.words().to_vec(),
            template_hash: template.hash(),
            template,
            frozen: self.pipeline.frozen.clone(),
            pool: self.pipeline.pools.clone(),
            spell_dictionary: self
                .pipeline
                .spell
                .as_ref()
                .map(DictionaryChecker::frequencies),
            items: self.pipeline.items.values().cloned().collect(),
            train_config: self.config.clone(),
            config_hash: config_hash.to_string(),
            seed: self.config.seed,
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.verify()?;
        let spell = ck
            .spell_dictionary
            .as_ref()
            .map(|f| DictionaryChecker::new(f.iter().map(|(w, &c)| (w.clone(), c)).collect()));
        let pipeline = Pipeline::restore(
            &ck.items,
            ck.vocab.clone(),
            ck.template.clone(),
            spell,
            ck.pool.clone(),
            ck.frozen.clone(),
            ck.ablation,
        )?;
        Ok(TrainedScorer {
            variant: ck.variant,
            config: ck.train_config.clone(),
            pipeline,
            models: ck.models()?,
            reports: BTreeMap::new(),
        })
    }
}

struct Prepared {
    pipeline: Pipeline,
    train: Vec<Target>,
    validation: Vec<Target>,
}

fn prepare(
    items: &[Item],
    split: &Split,
    template: &TemplateConfig,
    cfg: &TrainConfig,
) -> Result<Prepared> {
    cfg.validate()?;
    let pipeline = Pipeline::fit(items, &split.train, template, cfg)?;
    let targets = |rs: &[&Response]| {
        rs.iter()
            .map(|r| pipeline.target(r, cfg.condition_demographics))
            .collect::<Result<Vec<_>>>()
    };
    let train = targets(&split.train)?;
    let validation = targets(&split.validation)?;
    Ok(Prepared {
        pipeline,
        train,
        validation,
    })
}

fn check_variant(cfg: &TrainConfig, want: Variant) -> Result<()> {
    if cfg.variant != want {
        return Err(Error::Config(format!(
            "configuration names variant {} but {} training was requested",
            cfg.variant.name(),
            want.name()
        )));
    }
    Ok(())
}

/// One shared model trained on the union of every item's training split.
pub fn meta_train(
    items: &[Item],
    responses: &[Response],
    folds: &FoldPlan,
    rotation: Rotation,
    template: &TemplateConfig,
    cfg: &TrainConfig,
) -> Result<TrainedScorer> {
    check_variant(cfg, Variant::SharedInContext)?;
    train_single(
        items,
        &split(responses, folds, rotation)?,
        template,
        cfg,
        false,
    )
}

/// One encoder with a classification head per item.
pub fn train_multi_task(
    items: &[Item],
    responses: &[Response],
    folds: &FoldPlan,
    rotation: Rotation,
    template: &TemplateConfig,
    cfg: &TrainConfig,
) -> Result<TrainedScorer> {
    check_variant(cfg, Variant::MultiTask)?;
    train_single(
        items,
        &split(responses, folds, rotation)?,
        template,
        cfg,
        true,
    )
}

fn train_single(
    items: &[Item],
    split: &Split,
    template: &TemplateConfig,
    cfg: &TrainConfig,
    multi: bool,
) -> Result<TrainedScorer> {
    let prep = prepare(items, split, template, cfg)?;
    let vocab = prep.pipeline.tokenizer.vocab_size();
    let model_cfg = cfg.encoder.config(vocab);
    let d = model_cfg.d_model;
    let init = seed::derive(cfg.seed, &[seed::label("model")]);
    let mut model = if multi {
        let ids: Vec<String> = items.iter().map(|i| i.item_id.clone()).collect();
        ScoringModel::multi_head(&model_cfg, d, &ids, init)?
    } else {
        ScoringModel::shared(&model_cfg, d, init)?
    };
    let report = fit::fit(
        &mut model,
        &prep.pipeline,
        &prep.train,
        &prep.validation,
        cfg,
        seed::derive(cfg.seed, &[seed::label("fit")]),
    )?;
    Ok(TrainedScorer {
        variant: cfg.variant,
        config: cfg.clone(),
        pipeline: prep.pipeline,
        models: vec![(Vec::new(), model)],
        reports: [("all".to_string(), report)].into(),
    })
}

/// An independent model per item, trained on that item's data only.
pub fn train_per_item(
    items: &[Item],
    responses: &[Response],
    folds: &FoldPlan,
    rotation: Rotation,
    template: &TemplateConfig,
    cfg: &TrainConfig,
) -> Result<TrainedScorer> {
    check_variant(cfg, Variant::PerItem)?;
    per_item_on_split(items, &split(responses, folds, rotation)?, template, cfg)
}

fn per_item_on_split(
    items: &[Item],
    split: &Split,
    template: &TemplateConfig,
    cfg: &TrainConfig,
) -> Result<TrainedScorer> {
    let prep = prepare(items, split, template, cfg)?;
    let model_cfg = cfg.encoder.config(prep.pipeline.tokenizer.vocab_size());
    let mut models = Vec::new();
    let mut reports = BTreeMap::new();
    for item in items {
        let id = &item.item_id;
        let train: Vec<Target> = prep
            .train
            .iter()
            .filter(|t| &t.item_id == id)
            .cloned()
            .collect();
        let val: Vec<Target> = prep
            .validation
            .iter()
            .filter(|t| &t.item_id == id)
            .cloned()
            .collect();
        let s = seed::derive(cfg.seed, &[seed::label("per-item"), seed::label(id)]);
        let mut model = ScoringModel::shared(
            &model_cfg,
            model_cfg.d_model,
            seed::derive(s, &[seed::label("model")]),
        )?;
        let report = fit::fit(
            &mut model,
            &prep.pipeline,
            &train,
            &val,
            cfg,
            seed::derive(s, &[seed::label("fit")]),
        )?;
        models.push((vec![id.clone()], model));
        reports.insert(id.clone(), report);
    }
    Ok(TrainedScorer {
        variant: Variant::PerItem,
        config: cfg.clone(),
        pipeline: prep.pipeline,
        models,
        reports,
    })
}

/// Train the configured variant on an explicit split.
pub fn train_on_split(
    items: &[Item],
    split: &Split,
    template: &TemplateConfig,
    cfg: &TrainConfig,
) -> Result<TrainedScorer> {
    match cfg.variant {
        Variant::SharedInContext => train_single(items, split, template, cfg, false),
        Variant::MultiTask => train_single(items, split, template, cfg, true),
        Variant::PerItem => per_item_on_split(items, split, template, cfg),
    }
}

/// Dispatch on `cfg.variant`.
pub fn train(
    items: &[Item],
    responses: &[Response],
    folds: &FoldPlan,
    rotation: Rotation,
    template: &TemplateConfig,
    cfg: &TrainConfig,
) -> Result<TrainedScorer> {
    train_on_split(items, &split(responses, folds, rotation)?, template, cfg)
}
