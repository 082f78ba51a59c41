use serde::{Deserialize, Serialize};

use super::sentences::split_sentences;
use super::tokenizer::Tokenizer;
use crate::model::{Encoder, Sequence};
use crate::{Error, Result};

const CLS_ROLE: u8 = 0;
const PASSAGE_ROLE: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassageMode {
    WholePassage,
    PerSentence,
}

/// Pooled frozen-encoder vectors for a passage: one for the whole text or one
/// per sentence, in sentence order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageEncoding {
    pub mode: PassageMode,
    pub vectors: Vec<Vec<f64>>,
}

impl PassageEncoding {
    pub fn width(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }
}

fn encode_span(text: &str, encoder: &dyn Encoder, tokenizer: &dyn Tokenizer) -> Result<Vec<f64>> {
    let cfg = encoder.config();
    let mut tokens = vec![tokenizer.special().cls];
    tokens.extend(tokenizer.encode(text));
    tokens.truncate(cfg.max_positions);
    let body_role = PASSAGE_ROLE.min(cfg.n_roles.saturating_sub(1) as u8);
    let roles: Vec<u8> = (0..tokens.len())
        .map(|i| if i == 0 { CLS_ROLE } else { body_role })
        .collect();
    encoder.pooled(&Sequence {
        tokens: &tokens,
        roles: &roles,
        slot_positions: &[],
        slot_vectors: &[],
    })
}

/// Run the frozen encoder over a passage. The encoder is only read.
pub fn encode_passage(
    text: &str,
    mode: PassageMode,
    encoder: &dyn Encoder,
    tokenizer: &dyn Tokenizer,
) -> Result<PassageEncoding> {
    if text.trim().is_empty() {
        return Err(Error::Validation("cannot encode an empty passage".into()));
    }
    let vectors = match mode {
        PassageMode::WholePassage => vec![encode_span(text, encoder, tokenizer)?],
        PassageMode::PerSentence => split_sentences(text)
            .iter()
            .map(|s| encode_span(s, encoder, tokenizer))
            .collect::<Result<_>>()?,
    };
    Ok(PassageEncoding { mode, vectors })
}
