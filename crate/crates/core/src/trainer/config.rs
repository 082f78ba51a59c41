use serde::{Deserialize, Serialize};

use crate::assembly::{InputAblation, N_ROLES};
use crate::model::EncoderConfig;
use crate::textprep::PassageMode;
use crate::{Error, Result};

use super::Variant;

/// Quantity watched by early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    ValidationQwk,
    ValidationLoss,
}

/// Shape of the trainable encoder; the vocabulary size is filled in from the
/// tokenizer built on the training split.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderShape {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_positions: usize,
}

impl Default for EncoderShape {
    fn default() -> Self {
        EncoderShape {
            d_model: 32,
            n_layers: 2,
            n_heads: 2,
            d_ff: 64,
            max_positions: 512,
        }
    }
}

impl EncoderShape {
    pub fn config(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            vocab_size,
            d_model: self.d_model,
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            d_ff: self.d_ff,
            max_positions: self.max_positions,
            n_roles: N_ROLES,
        }
    }
}

/// Frozen passage encoder; its width always equals the trainable encoder's.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrozenConfig {
    pub n_layers: usize,
    pub d_ff: usize,
    pub max_positions: usize,
    pub mode: PassageMode,
}

impl Default for FrozenConfig {
    fn default() -> Self {
        FrozenConfig {
            n_layers: 1,
            d_ff: 64,
            max_positions: 128,
            mode: PassageMode::PerSentence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    pub input_ablation: InputAblation,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub resamples: usize,
    pub monitor: Monitor,
    /// Prepend the demographic instruction when both attributes are known.
    pub condition_demographics: bool,
    pub spellcheck: bool,
    /// Minimum training-corpus frequency for a word to enter the spelling
    /// dictionary.
    pub spell_min_count: u64,
    pub encoder: EncoderShape,
    pub frozen: FrozenConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::SharedInContext,
            input_ablation: InputAblation::FullInContext,
            batch_size: 32,
            max_epochs: 10,
            early_stop_patience: 3,
            learning_rate: 3e-4,
            seed: 0,
            resamples: 8,
            monitor: Monitor::ValidationQwk,
            condition_demographics: false,
            spellcheck: true,
            spell_min_count: 3,
            encoder: EncoderShape::default(),
            frozen: FrozenConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Optimizer settings used for large pretrained encoders.
    pub fn pretrained_profile() -> Self {
        TrainConfig {
            learning_rate: 2e-5,
            encoder: EncoderShape {
                d_model: 768,
                n_layers: 12,
                n_heads: 12,
                d_ff: 3072,
                max_positions: 512,
            },
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("train: {m}")));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if self.resamples == 0 {
            return bad("resamples must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !self
            .encoder
            .d_model
            .is_multiple_of(self.encoder.n_heads.max(1))
            || self.encoder.n_heads == 0
        {
            return bad("encoder.d_model must be a multiple of encoder.n_heads");
        }
        Ok(())
    }

    pub fn frozen_config(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            vocab_size,
            d_model: self.encoder.d_model,
            n_layers: self.frozen.n_layers,
            n_heads: self.encoder.n_heads,
            d_ff: self.frozen.d_ff,
            max_positions: self.frozen.max_positions,
            n_roles: N_ROLES,
        }
    }
}
