use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::assembly::AssembledInput;
use crate::metrics::qwk;
use crate::model::{
    nll, predict_ensemble, Adam, AdamConfig, EnsemblePrediction, LabeledInput, ScoringModel,
};
use crate::{seed, Error, Result};

use super::config::{Monitor, TrainConfig};
use super::pipeline::{Pipeline, Target};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_train_loss: Vec<f64>,
    pub epoch_val_qwk: Vec<BTreeMap<String, f64>>,
    pub epoch_val_mean_qwk: Vec<f64>,
    pub epoch_val_loss: Vec<f64>,
    /// One-based; the epoch whose parameters were kept.
    pub selected_epoch: usize,
    pub diverged: bool,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

/// Epoch `selected` that early stopping keeps, given the monitored values in
/// order (higher is better), plus the number of epochs actually run.
pub fn early_stop(values: &[f64], patience: usize) -> (usize, usize) {
    let mut best = 0;
    for (e, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = e;
        } else if e - best >= patience.max(1) {
            return (best + 1, e + 1);
        }
    }
    (best + 1, values.len())
}

pub(crate) fn example_seed(base: u64, stream: &str, index: u64, response_id: &str) -> u64 {
    seed::derive(
        base,
        &[seed::label(stream), index, seed::label(response_id)],
    )
}

/// Averaged distributions over `resamples` example draws per target. Inputs
/// without examples are identical across draws and are scored once.
pub fn predict_targets(
    model: &ScoringModel,
    pipe: &Pipeline,
    targets: &[Target],
    resamples: usize,
    base_seed: u64,
) -> Result<Vec<EnsemblePrediction>> {
    let draws = if pipe.ablation.uses_examples() {
        resamples.max(1)
    } else {
        1
    };
    targets
        .iter()
        .map(|t| {
            let inputs = (0..draws)
                .map(|r| {
                    pipe.input(
                        t,
                        example_seed(base_seed, "resample", r as u64, &t.response_id),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            predict_ensemble(model, &inputs)
        })
        .collect()
}

fn per_item_qwk(
    pipe: &Pipeline,
    targets: &[Target],
    preds: &[u8],
) -> Result<BTreeMap<String, f64>> {
    let mut by_item: BTreeMap<&str, (Vec<u8>, Vec<u8>)> = BTreeMap::new();
    for (t, &p) in targets.iter().zip(preds) {
        let e = by_item.entry(&t.item_id).or_default();
        e.0.push(t.label);
        e.1.push(p);
    }
    by_item
        .into_iter()
        .map(|(id, (truth, pred))| {
            let item = pipe.item(id)?;
            Ok((
                id.to_string(),
                qwk(&truth, &pred, item.min_score, item.max_score)?,
            ))
        })
        .collect()
}

/// Mini-batch training with Adam and early stopping. Leaves the selected
/// epoch's parameters in `model`.
pub(crate) fn fit(
    model: &mut ScoringModel,
    pipe: &Pipeline,
    train: &[Target],
    val: &[Target],
    cfg: &TrainConfig,
    base_seed: u64,
) -> Result<TrainReport> {
    let start = Instant::now();
    if train.is_empty() {
        return Err(Error::Validation("no training responses".into()));
    }
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.learning_rate), model.n_params());
    let mut grads = vec![0.0; model.n_params()];

    // validation draws are fixed across epochs
    let val_inputs: Vec<AssembledInput> = val
        .iter()
        .map(|t| pipe.input(t, example_seed(base_seed, "validation", 0, &t.response_id)))
        .collect::<Result<_>>()?;

    let mut report = TrainReport {
        epoch_train_loss: Vec::new(),
        epoch_val_qwk: Vec::new(),
        epoch_val_mean_qwk: Vec::new(),
        epoch_val_loss: Vec::new(),
        selected_epoch: 0,
        diverged: false,
        wall_clock_secs: 0.0,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut best_epoch = 0;

    'epochs: for epoch in 0..cfg.max_epochs {
        let epoch_start = model.params.clone();
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut seed::rng(
            base_seed,
            &[seed::label("epoch"), epoch as u64],
        ));

        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = chunk
                .iter()
                .map(|&i| {
                    let t = &train[i];
                    Ok(LabeledInput {
                        input: pipe.input(
                            t,
                            example_seed(base_seed, "train", epoch as u64, &t.response_id),
                        )?,
                        label: t.label,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            grads.fill(0.0);
            let loss = match model.loss_and_grad(&batch, &mut grads) {
                Ok(l) if l.is_finite() && grads.iter().all(|g| g.is_finite()) => l,
                Ok(_) | Err(Error::Numeric { .. }) => {
                    log::warn!(
                        "non-finite loss in epoch {}; keeping last finite parameters",
                        epoch + 1
                    );
                    report.diverged = true;
                    if best.is_none() {
                        model.params = epoch_start;
                    }
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            loss_sum += loss;
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut model.params, &grads);
        }
        let epoch_loss = loss_sum / train.len() as f64;
        report.epoch_train_loss.push(epoch_loss);

        let value = if val.is_empty() {
            -epoch_loss
        } else {
            let mut preds = Vec::with_capacity(val.len());
            let mut vloss = 0.0;
            for (t, input) in val.iter().zip(&val_inputs) {
                let d = model.distribution(input)?;
                vloss += nll(&d, t.label)?;
                preds.push(d.predicted());
            }
            let per_item = per_item_qwk(pipe, val, &preds)?;
            let mean = per_item.values().sum::<f64>() / per_item.len() as f64;
            let vloss = vloss / val.len() as f64;
            report.epoch_val_qwk.push(per_item);
            report.epoch_val_mean_qwk.push(mean);
            report.epoch_val_loss.push(vloss);
            match cfg.monitor {
                Monitor::ValidationQwk => mean,
                Monitor::ValidationLoss => -vloss,
            }
        };
        log::info!(
            "epoch {}: train loss {:.4}, monitored {:.4}",
            epoch + 1,
            epoch_loss,
            value
        );
        match &best {
            Some((b, _)) if value <= *b => {
                if epoch - best_epoch >= cfg.early_stop_patience.max(1) {
                    break;
                }
            }
            _ => {
                best = Some((value, model.params.clone()));
                best_epoch = epoch;
            }
        }
    }
    if let Some((_, params)) = best {
        model.params = params;
        report.selected_epoch = best_epoch + 1;
    }
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(report)
}
