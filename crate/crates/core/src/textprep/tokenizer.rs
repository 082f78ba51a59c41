use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialTokens {
    pub pad: u32,
    pub unk: u32,
    pub cls: u32,
    pub sep: u32,
}

pub trait Tokenizer: Send + Sync {
    fn vocab_size(&self) -> usize;
    fn special(&self) -> SpecialTokens;
    fn encode(&self, text: &str) -> Vec<u32>;
    fn decode(&self, ids: &[u32]) -> String;
}

const SPECIALS: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"];

/// Lowercase, split on whitespace, and split every punctuation character
/// into its own token.
pub fn pre_tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        for ch in chunk.chars() {
            if ch.is_alphanumeric() || ch == '\'' {
                word.extend(ch.to_lowercase());
            } else {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(ch.to_string());
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}

/// Whitespace-and-punctuation tokenizer over a corpus-built vocabulary with
/// `[UNK]` fallback. Ids 0..4 are `[PAD] [UNK] [CLS] [SEP]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WordTokenizer {
    vocab: Vec<String>,
    index: HashMap<String, u32>,
}

impl WordTokenizer {
    pub fn from_vocab(words: Vec<String>) -> Result<Self> {
        if words.len() < SPECIALS.len() || words[..SPECIALS.len()] != SPECIALS {
            return Err(Error::Validation(format!(
                "vocabulary must start with {}",
                SPECIALS.join(" ")
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate vocabulary entry {w:?}"
                )));
            }
        }
        Ok(WordTokenizer {
            vocab: words,
            index,
        })
    }

    /// Vocabulary of every token seen at least `min_count` times, most frequent
    /// first, ties in lexicographic order.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for text in texts {
            for tok in pre_tokenize(text) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut words: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(w, c)| *c >= min_count && !SPECIALS.contains(&w.as_str()))
            .collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let vocab = SPECIALS
            .iter()
            .map(|s| s.to_string())
            .chain(words.into_iter().map(|(w, _)| w))
            .collect();
        Self::from_vocab(vocab).expect("specials are unique and first")
    }

    pub fn words(&self) -> &[String] {
        &self.vocab
    }

    /// Vocabulary file: one token per line, id = line index.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_vocab(text.lines().map(str::to_string).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.vocab.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

impl Tokenizer for WordTokenizer {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn special(&self) -> SpecialTokens {
        SpecialTokens {
            pad: 0,
            unk: 1,
            cls: 2,
            sep: 3,
        }
    }

    fn encode(&self, text: &str) -> Vec<u32> {
        pre_tokenize(text)
            .into_iter()
            .map(|t| self.index.get(&t).copied().unwrap_or(1))
            .collect()
    }

    fn decode(&self, ids: &[u32]) -> String {
        ids.iter()
            .map(|&i| {
                self.vocab
                    .get(i as usize)
                    .map(String::as_str)
                    .unwrap_or("[UNK]")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}
