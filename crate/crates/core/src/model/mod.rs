//! Scoring model: a pluggable encoder interface, the reference transformer,
//! classification heads over the four global score classes, masked softmax
//! and the negative log-likelihood objectives.

mod checkpoint;
mod layout;
mod loss;
mod optim;
mod predict;
mod scorer;
mod softmax;
mod transformer;

pub use checkpoint::{Checkpoint, FrozenSpec, StoredModel, CHECKPOINT_VERSION};
pub use layout::{Allocator, Init, Span};
pub use loss::{item_loss, nll, total_loss, LabeledInput};
pub use optim::{Adam, AdamConfig};
pub use predict::{predict_ensemble, EnsemblePrediction};
pub use scorer::{ModelLayout, ScoringModel};
pub use softmax::{masked_softmax, ScoreDistribution};
pub use transformer::{EncoderConfig, ForwardCache, Sequence, TransformerLayout};

use sha2::{Digest, Sha256};

use crate::seed;
use crate::{Error, Result};

/// Anything that maps a sequence to a pooled vector of fixed width.
pub trait Encoder: Send + Sync {
    fn config(&self) -> &EncoderConfig;
    fn pooled(&self, seq: &Sequence) -> Result<Vec<f64>>;
    /// Digest of all parameters; unchanged for a frozen encoder.
    fn parameter_digest(&self) -> String;
}

/// Stand-alone reference encoder, used frozen for passage encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformerEncoder {
    layout: TransformerLayout,
    params: Vec<f64>,
}

impl TransformerEncoder {
    pub fn new(config: &EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut alloc = Allocator::default();
        let layout = TransformerLayout::new(config, config.d_model, &mut alloc);
        let params = alloc.initialize(&mut seed::rng(seed, &[seed::label("frozen-encoder")]));
        Ok(TransformerEncoder { layout, params })
    }
}

impl Encoder for TransformerEncoder {
    fn config(&self) -> &EncoderConfig {
        &self.layout.config
    }

    fn pooled(&self, seq: &Sequence) -> Result<Vec<f64>> {
        let (pooled, _) = self
            .layout
            .forward(&self.params, seq)
            .map_err(|what| Error::Numeric { index: 0, what })?;
        Ok(pooled.to_vec())
    }

    fn parameter_digest(&self) -> String {
        params_digest(&self.params)
    }
}

/// SHA-256 over the little-endian bytes of a parameter vector.
pub fn params_digest(params: &[f64]) -> String {
    let mut h = Sha256::new();
    for p in params {
        h.update(p.to_le_bytes());
    }
    hex::encode(h.finalize())
}
