use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::layout::{Allocator, Init, Span};
use super::loss::{nll, LabeledInput};
use super::softmax::{masked_softmax, ScoreDistribution};
use super::transformer::{EncoderConfig, ForwardCache, TransformerLayout};
use crate::assembly::AssembledInput;
use crate::seed;
use crate::{Error, Result, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelLayout {
    pub encoder: TransformerLayout,
    /// Per head: weight (classes × d) and bias (1 × classes).
    pub heads: Vec<(Span, Span)>,
    pub total: usize,
}

/// Encoder plus one or more linear classification heads over the four
/// global score classes. A single head serves every item (shared model);
/// several heads are routed by item id (multi-task model).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringModel {
    layout: ModelLayout,
    pub params: Vec<f64>,
    head_index: BTreeMap<String, usize>,
}

impl ScoringModel {
    /// One shared head.
    pub fn shared(config: &EncoderConfig, passage_dim: usize, seed: u64) -> Result<Self> {
        Self::build(config, passage_dim, Vec::new(), seed)
    }

    /// One head per listed item, sharing the encoder.
    pub fn multi_head(
        config: &EncoderConfig,
        passage_dim: usize,
        items: &[String],
        seed: u64,
    ) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Config(
                "multi-head model needs at least one item".into(),
            ));
        }
        Self::build(config, passage_dim, items.to_vec(), seed)
    }

    fn build(
        config: &EncoderConfig,
        passage_dim: usize,
        items: Vec<String>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut alloc = Allocator::default();
        let encoder = TransformerLayout::new(config, passage_dim, &mut alloc);
        let n_heads = items.len().max(1);
        let heads = (0..n_heads)
            .map(|_| {
                (
                    alloc.alloc(NUM_CLASSES, config.d_model, Init::Normal(0.02)),
                    alloc.alloc(1, NUM_CLASSES, Init::Zeros),
                )
            })
            .collect();
        let params = alloc.initialize(&mut seed::rng(seed, &[seed::label("scoring-model")]));
        let head_index = items
            .into_iter()
            .enumerate()
            .map(|(i, id)| (id, i))
            .collect();
        Ok(ScoringModel {
            layout: ModelLayout {
                encoder,
                heads,
                total: alloc.total(),
            },
            params,
            head_index,
        })
    }

    pub fn from_parts(
        layout: ModelLayout,
        params: Vec<f64>,
        head_items: Vec<String>,
    ) -> Result<Self> {
        if params.len() != layout.total {
            return Err(Error::Checkpoint(format!(
                "parameter count {} does not match layout {}",
                params.len(),
                layout.total
            )));
        }
        let expected_heads = head_items.len().max(1);
        if layout.heads.len() != expected_heads {
            return Err(Error::Checkpoint(
                "head count does not match head item list".into(),
            ));
        }
        let head_index = head_items
            .into_iter()
            .enumerate()
            .map(|(i, id)| (id, i))
            .collect();
        Ok(ScoringModel {
            layout,
            params,
            head_index,
        })
    }

    pub fn layout(&self) -> &ModelLayout {
        &self.layout
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.layout.encoder.config
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Item ids in head order; empty for a shared-head model.
    pub fn head_items(&self) -> Vec<String> {
        let mut v: Vec<(&String, &usize)> = self.head_index.iter().collect();
        v.sort_by_key(|(_, &i)| i);
        v.into_iter().map(|(s, _)| s.clone()).collect()
    }

    pub fn head_for(&self, item_id: &str) -> Result<usize> {
        if self.head_index.is_empty() {
            return Ok(0);
        }
        self.head_index
            .get(item_id)
            .copied()
            .ok_or_else(|| Error::Reference(format!("no classification head for item {item_id}")))
    }

    fn encode(
        &self,
        input: &AssembledInput,
    ) -> std::result::Result<(Array1<f64>, ForwardCache), String> {
        let roles = input.role_ids();
        self.layout
            .encoder
            .forward(&self.params, &input.sequence(&roles))
    }

    fn head_logits(&self, head: usize, pooled: ArrayView1<f64>) -> [f64; NUM_CLASSES] {
        let (w, b) = self.layout.heads[head];
        let z = w.mat(&self.params).dot(&pooled) + b.vec(&self.params);
        let mut out = [0.0; NUM_CLASSES];
        for (o, v) in out.iter_mut().zip(z.iter()) {
            *o = *v;
        }
        out
    }

    pub fn logits(&self, input: &AssembledInput) -> Result<[f64; NUM_CLASSES]> {
        self.forward_logits(std::slice::from_ref(input))
            .map(|m| [m[[0, 0]], m[[0, 1]], m[[0, 2]], m[[0, 3]]])
    }

    /// Logits for each input of the batch (n × 4).
    pub fn forward_logits(&self, batch: &[AssembledInput]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((batch.len(), NUM_CLASSES));
        for (i, input) in batch.iter().enumerate() {
            let head = self.head_for(&input.item_id)?;
            let (pooled, _) = self
                .encode(input)
                .map_err(|what| Error::Numeric { index: i, what })?;
            let z = self.head_logits(head, pooled.view());
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric {
                    index: i,
                    what: "non-finite logit".into(),
                });
            }
            for c in 0..NUM_CLASSES {
                out[[i, c]] = z[c];
            }
        }
        Ok(out)
    }

    pub fn distribution(&self, input: &AssembledInput) -> Result<ScoreDistribution> {
        masked_softmax(&self.logits(input)?, &input.valid_mask)
    }

    /// Summed negative log-likelihood of the batch; its gradient with respect
    /// to every parameter is added into `grads`.
    pub fn loss_and_grad(&self, batch: &[LabeledInput], grads: &mut [f64]) -> Result<f64> {
        assert_eq!(grads.len(), self.params.len(), "gradient buffer layout");
        let mut total = 0.0;
        for (i, ex) in batch.iter().enumerate() {
            let head = self.head_for(&ex.input.item_id)?;
            let (pooled, cache) = self
                .encode(&ex.input)
                .map_err(|what| Error::Numeric { index: i, what })?;
            let logits = self.head_logits(head, pooled.view());
            let dist = masked_softmax(&logits, &ex.input.valid_mask)?;
            let loss = nll(&dist, ex.label)?;
            if !loss.is_finite() {
                return Err(Error::Numeric {
                    index: i,
                    what: "non-finite loss".into(),
                });
            }
            total += loss;

            // d(-log p_y)/dz_c = p_c - [c = y] on valid classes, 0 elsewhere
            let mut dz = dist.probs;
            dz[(ex.label - 1) as usize] -= 1.0;
            let (w, b) = self.layout.heads[head];
            let wmat = w.mat(&self.params);
            let mut dpooled = Array1::<f64>::zeros(pooled.len());
            for c in 0..NUM_CLASSES {
                if !ex.input.valid_mask[c] || dz[c] == 0.0 {
                    continue;
                }
                dpooled.scaled_add(dz[c], &wmat.row(c));
                for (g, p) in w.row_mut(grads, c).iter_mut().zip(pooled.iter()) {
                    *g += dz[c] * p;
                }
                b.row_mut(grads, 0)[c] += dz[c];
            }
            let roles = ex.input.role_ids();
            self.layout.encoder.backward(
                &self.params,
                &ex.input.sequence(&roles),
                &cache,
                dpooled.view(),
                grads,
            );
        }
        Ok(total)
    }
}
