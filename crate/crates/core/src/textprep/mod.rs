//! Text preparation: tokenization, spell correction, sentence splitting,
//! truncation and frozen passage encoding.

mod passage;
mod sentences;
mod spell;
mod tokenizer;

pub use passage::{encode_passage, PassageEncoding, PassageMode};
pub use sentences::split_sentences;
pub use spell::{correct_spelling, osa_distance, DictionaryChecker, SpellChecker};
pub use tokenizer::{pre_tokenize, SpecialTokens, Tokenizer, WordTokenizer};

/// First `min(len, limit)` tokens, order preserved.
pub fn truncate_tokens(tokens: &[u32], limit: usize) -> Vec<u32> {
    assert!(limit >= 1, "truncation limit must be at least 1");
    tokens[..tokens.len().min(limit)].to_vec()
}
