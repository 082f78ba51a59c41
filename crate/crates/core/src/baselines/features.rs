use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::lexicon::WordList;
use super::readability::{readability, words};
use super::tagger::{PosTagger, Tag};
use crate::{Error, Result};

/// Hand-designed response features.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub word_count: f64,
    /// Non-whitespace characters.
    pub char_count: f64,
    pub stopword_count: f64,
    pub punctuation_count: f64,
    pub char_to_word_ratio: f64,
    /// Distinct lemmas.
    pub lemma_count: f64,
    pub noun_count: f64,
    pub verb_count: f64,
    pub adjective_count: f64,
    pub adverb_count: f64,
    pub conjunction_count: f64,
    pub ari: f64,
    pub coleman_liau: f64,
    pub dale_chall: f64,
    pub smog: f64,
    pub flesch: f64,
}

pub const N_FEATURES: usize = 16;

impl FeatureVector {
    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [
            self.word_count,
            self.char_count,
            self.stopword_count,
            self.punctuation_count,
            self.char_to_word_ratio,
            self.lemma_count,
            self.noun_count,
            self.verb_count,
            self.adjective_count,
            self.adverb_count,
            self.conjunction_count,
            self.ari,
            self.coleman_liau,
            self.dale_chall,
            self.smog,
            self.flesch,
        ]
    }
}

/// Word lists and tagger used by feature extraction.
pub struct FeatureExtractor<'a> {
    pub tagger: &'a dyn PosTagger,
    pub stopwords: &'a WordList,
    pub easy_words: &'a WordList,
}

impl FeatureExtractor<'_> {
    pub fn extract(&self, text: &str) -> FeatureVector {
        extract_features(text, self.tagger, self.stopwords, self.easy_words)
    }
}

pub fn extract_features(
    text: &str,
    tagger: &dyn PosTagger,
    stopwords: &WordList,
    easy_words: &WordList,
) -> FeatureVector {
    let ws = words(text);
    let word_count = ws.len() as f64;
    let char_count = text.chars().filter(|c| !c.is_whitespace()).count() as f64;
    let punctuation_count = text.chars().filter(|c| c.is_ascii_punctuation()).count() as f64;
    let stopword_count = ws.iter().filter(|w| stopwords.contains(w)).count() as f64;
    let lemmas: BTreeSet<String> = ws.iter().map(|w| tagger.lemma(w)).collect();
    let tags = tagger.tag(&ws);
    let count = |t: Tag| tags.iter().filter(|&&x| x == t).count() as f64;
    let r = readability(text, easy_words);
    FeatureVector {
        word_count,
        char_count,
        stopword_count,
        punctuation_count,
        char_to_word_ratio: char_count / word_count.max(1.0),
        lemma_count: lemmas.len() as f64,
        noun_count: count(Tag::Noun),
        verb_count: count(Tag::Verb),
        adjective_count: count(Tag::Adjective),
        adverb_count: count(Tag::Adverb),
        conjunction_count: count(Tag::Conjunction),
        ari: r.ari,
        coleman_liau: r.coleman_liau,
        dale_chall: r.dale_chall,
        smog: r.smog,
        flesch: r.flesch,
    }
}

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "word_count",
    "char_count",
    "stopword_count",
    "punctuation_count",
    "char_to_word_ratio",
    "lemma_count",
    "noun_count",
    "verb_count",
    "adjective_count",
    "adverb_count",
    "conjunction_count",
    "ari",
    "coleman_liau",
    "dale_chall",
    "smog",
    "flesch",
];

/// Delimited feature table with a header row.
pub fn write_features_csv(path: &Path, rows: &[(String, String, FeatureVector)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(
        ["response_id", "item_id"]
            .iter()
            .chain(FEATURE_NAMES.iter()),
    )?;
    for (rid, iid, f) in rows {
        let values = f.to_array().map(|v| v.to_string());
        w.write_record(
            [rid.as_str(), iid.as_str()]
                .into_iter()
                .chain(values.iter().map(String::as_str)),
        )?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
