//! Synthetic corpus with a planted scoring rule.
//!
//! Every item owns one keyword list per score tier. A response's true score is
//! the number of distinct tiers whose keywords it contains, clipped to the
//! item's range. Cross-grade pairs reuse passage, question and keyword lists.
//! Rater 1 is the planted score flipped to a uniformly random other valid score
//! with the configured noise probability (optionally overridden per demographic
//! group).

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::types::{Item, Response, ResponseFormat};
use crate::seed::{self, Rng};
use crate::{Error, Result};

/// Words reserved for filler and passage text beyond the keyword allotment.
const MIN_FREE_WORDS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemographicConfig {
    pub genders: Vec<(String, f64)>,
    pub ethnicities: Vec<(String, f64)>,
    /// Noise-rate overrides keyed by a gender or ethnicity label; ethnicity wins
    /// when both match.
    pub group_noise: BTreeMap<String, f64>,
}

impl Default for DemographicConfig {
    fn default() -> Self {
        let g = |s: &str, w: f64| (s.to_string(), w);
        DemographicConfig {
            genders: vec![g("Female", 0.5), g("Male", 0.5)],
            ethnicities: vec![
                g("White", 0.45),
                g("Hispanic", 0.22),
                g("Black", 0.15),
                g("Asian", 0.08),
                g("Two or more races", 0.05),
                g("American Indian", 0.03),
                g("Pacific Islander", 0.02),
            ],
            group_noise: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_items: usize,
    pub n_shared_pairs: usize,
    pub responses_per_item: usize,
    pub vocab_size: usize,
    pub keyword_count_per_class: usize,
    pub noise_rate: f64,
    pub seed: u64,
    pub double_rated_fraction: f64,
    /// Probability that a word in a response has two adjacent letters swapped.
    pub typo_rate: f64,
    pub demographics: DemographicConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_items: 20,
            n_shared_pairs: 8,
            responses_per_item: 500,
            vocab_size: 1200,
            keyword_count_per_class: 4,
            noise_rate: 0.05,
            seed: 0,
            double_rated_fraction: 0.05,
            typo_rate: 0.0,
            demographics: DemographicConfig::default(),
        }
    }
}

impl SynthConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: SynthConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::Config(format!("{field}: {why}")));
        if self.n_items == 0 {
            return bad("n_items", "must be positive");
        }
        if self.n_shared_pairs * 2 > self.n_items {
            return bad("n_shared_pairs", "must be at most n_items / 2");
        }
        if self.responses_per_item == 0 {
            return bad("responses_per_item", "must be positive");
        }
        if self.keyword_count_per_class == 0 {
            return bad("keyword_count_per_class", "must be positive");
        }
        if !(0.0..0.5).contains(&self.noise_rate) {
            return bad("noise_rate", "must lie in [0, 0.5)");
        }
        if !(0.0..=1.0).contains(&self.double_rated_fraction) {
            return bad("double_rated_fraction", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.typo_rate) {
            return bad("typo_rate", "must lie in [0, 1]");
        }
        for (label, rate) in &self.demographics.group_noise {
            if !(0.0..0.5).contains(rate) {
                return Err(Error::Config(format!(
                    "demographics.group_noise.{label}: must lie in [0, 0.5)"
                )));
            }
        }
        for (field, groups) in [
            ("demographics.genders", &self.demographics.genders),
            ("demographics.ethnicities", &self.demographics.ethnicities),
        ] {
            if groups.is_empty()
                || groups.iter().any(|(_, w)| !w.is_finite() || *w < 0.0)
                || groups.iter().all(|(_, w)| *w == 0.0)
            {
                return bad(field, "needs at least one label with positive weight");
            }
        }
        let needed = self.keyword_budget() + MIN_FREE_WORDS;
        if self.vocab_size < needed {
            return Err(Error::Config(format!(
                "vocab_size: {} words cannot hold {} disjoint keywords plus {MIN_FREE_WORDS} free words",
                self.vocab_size,
                self.keyword_budget()
            )));
        }
        if self.vocab_size > word_capacity() {
            return bad("vocab_size", "exceeds the pseudo-word generator capacity");
        }
        Ok(())
    }

    fn keyword_sets(&self) -> usize {
        self.n_items - self.n_shared_pairs
    }

    /// Upper bound on keywords needed (every set allotted four tiers).
    fn keyword_budget(&self) -> usize {
        self.keyword_sets() * crate::NUM_CLASSES * self.keyword_count_per_class
    }
}

/// Generated items and responses plus the hidden ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub items: Vec<Item>,
    pub responses: Vec<Response>,
    /// Noise-free planted score per response id.
    pub planted: BTreeMap<String, u8>,
    /// Keyword lists per item, one list per tier (tier t scores t).
    pub keywords: BTreeMap<String, Vec<Vec<String>>>,
}

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

fn word_capacity() -> usize {
    let syl = ONSETS.len() * VOWELS.len();
    syl * syl + syl * syl * syl
}

/// Deterministic pronounceable pseudo-word for an index: two syllables for
/// the first 4900 indices, three after that.
fn pseudo_word(index: usize) -> String {
    let syl = ONSETS.len() * VOWELS.len();
    let syllable = |k: usize| format!("{}{}", ONSETS[k / VOWELS.len()], VOWELS[k % VOWELS.len()]);
    if index < syl * syl {
        format!("{}{}", syllable(index / syl), syllable(index % syl))
    } else {
        let i = index - syl * syl;
        format!(
            "{}{}{}",
            syllable(i / (syl * syl)),
            syllable((i / syl) % syl),
            syllable(i % syl)
        )
    }
}

fn weighted_pick<'a>(rng: &mut Rng, options: &'a [(String, f64)]) -> &'a str {
    let total: f64 = options.iter().map(|(_, w)| w).sum();
    let mut x = rng.random::<f64>() * total;
    for (label, w) in options {
        if x < *w {
            return label;
        }
        x -= w;
    }
    &options.last().expect("validated non-empty").0
}

fn sentence(rng: &mut Rng, pool: &[String], len: usize, end: char) -> String {
    let words: Vec<&str> = (0..len)
        .map(|_| pool.choose(rng).expect("pool").as_str())
        .collect();
    let mut s = words.join(" ");
    capitalize(&mut s);
    s.push(end);
    s
}

fn capitalize(s: &mut String) {
    if let Some(first) = s.chars().next() {
        let upper: String = first.to_uppercase().collect();
        s.replace_range(..first.len_utf8(), &upper);
    }
}

fn swap_typo(rng: &mut Rng, word: &str) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    if chars.len() >= 2 {
        let i = rng.random_range(0..chars.len() - 1);
        chars.swap(i, i + 1);
    }
    chars.into_iter().collect()
}

/// Score under the planted rule: count of tiers with at least one keyword
/// present, clipped to `[1, max_score]`.
fn planted_score(words: &[String], tiers: &[Vec<String>], max_score: u8) -> u8 {
    let matched = tiers
        .iter()
        .filter(|tier| tier.iter().any(|k| words.iter().any(|w| w == k)))
        .count();
    (matched as u8).clamp(1, max_score)
}

/// Class prior favouring low scores.
fn class_weights(max_score: u8) -> Vec<f64> {
    [0.35, 0.3, 0.2, 0.15][..max_score as usize].to_vec()
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let mut rng = seed::rng(cfg.seed, &[seed::label("synthetic-corpus")]);

    let mut words: Vec<String> = (0..cfg.vocab_size).map(pseudo_word).collect();
    words.shuffle(&mut rng);
    let kpc = cfg.keyword_count_per_class;
    let (keyword_words, free_words) = words.split_at(cfg.keyword_budget());
    let filler: Vec<String> = free_words[..free_words.len() / 2].to_vec();
    let passage_pool: Vec<String> = free_words[free_words.len() / 2..].to_vec();

    // one keyword set per unique passage/question; shared sets back two items
    struct KeySet {
        tiers: Vec<Vec<String>>,
        passage: String,
        question: String,
        max_score: u8,
        format: ResponseFormat,
    }
    let mut sets = Vec::new();
    for s in 0..cfg.keyword_sets() {
        let format = if rng.random_bool(0.5) {
            ResponseFormat::Short
        } else {
            ResponseFormat::Extended
        };
        let max_score = match format {
            ResponseFormat::Short => rng.random_range(2..=3),
            ResponseFormat::Extended => rng.random_range(3..=4),
        };
        let base = s * crate::NUM_CLASSES * kpc;
        let tiers = (0..max_score as usize)
            .map(|t| keyword_words[base + t * kpc..base + (t + 1) * kpc].to_vec())
            .collect();
        let n_sentences = rng.random_range(6..=10);
        let passage = (0..n_sentences)
            .map(|_| {
                let len = rng.random_range(8..=14);
                sentence(&mut rng, &passage_pool, len, '.')
            })
            .collect::<Vec<_>>()
            .join(" ");
        let qlen = rng.random_range(8..=12);
        let question = sentence(&mut rng, &passage_pool, qlen, '?');
        sets.push(KeySet {
            tiers,
            passage,
            question,
            max_score,
            format,
        });
    }

    let mut items = Vec::with_capacity(cfg.n_items);
    let mut item_set = Vec::with_capacity(cfg.n_items);
    for (s, set) in sets.iter().enumerate() {
        let shared = s < cfg.n_shared_pairs;
        let grades: &[u8] = if shared {
            &[4, 8]
        } else if s % 2 == 0 {
            &[4]
        } else {
            &[8]
        };
        for &grade in grades {
            items.push(Item {
                item_id: format!("item{:02}", items.len() + 1),
                grade,
                passage_text: set.passage.clone(),
                question_text: set.question.clone(),
                rubric_text: None,
                min_score: 1,
                max_score: set.max_score,
                response_format: set.format,
                link_key: shared.then(|| format!("link{:02}", s + 1)),
            });
            item_set.push(s);
        }
    }

    let demo = &cfg.demographics;
    let mut responses = Vec::with_capacity(cfg.n_items * cfg.responses_per_item);
    let mut planted = BTreeMap::new();
    let mut keywords = BTreeMap::new();
    for (item, &s) in items.iter().zip(&item_set) {
        let set = &sets[s];
        keywords.insert(item.item_id.clone(), set.tiers.clone());
        let weights = class_weights(item.max_score);
        let total_w: f64 = weights.iter().sum();
        for j in 0..cfg.responses_per_item {
            let mut x = rng.random::<f64>() * total_w;
            let mut class = 1u8;
            for (c, w) in weights.iter().enumerate() {
                if x < *w {
                    class = c as u8 + 1;
                    break;
                }
                x -= w;
                class = c as u8 + 1;
            }
            let n_filler = rng.random_range(3..=8);
            let mut tokens: Vec<String> = (0..n_filler)
                .map(|_| filler.choose(&mut rng).expect("filler").clone())
                .collect();
            for tier in 0..class as usize {
                if tier == 0 && class == 1 && rng.random_bool(0.5) {
                    continue;
                }
                tokens.push(set.tiers[tier].choose(&mut rng).expect("tier").clone());
            }
            tokens.shuffle(&mut rng);
            let truth = planted_score(&tokens, &set.tiers, item.max_score);
            if cfg.typo_rate > 0.0 {
                for t in tokens.iter_mut() {
                    if rng.random_bool(cfg.typo_rate) {
                        *t = swap_typo(&mut rng, t);
                    }
                }
            }
            let mut text = tokens.join(" ");
            capitalize(&mut text);
            text.push('.');

            let gender = weighted_pick(&mut rng, &demo.genders).to_string();
            let ethnicity = weighted_pick(&mut rng, &demo.ethnicities).to_string();
            let noise = demo
                .group_noise
                .get(&ethnicity)
                .or_else(|| demo.group_noise.get(&gender))
                .copied()
                .unwrap_or(cfg.noise_rate);
            let rater1 = noisy(&mut rng, truth, item.max_score, noise);
            let rater2 = rng
                .random_bool(cfg.double_rated_fraction)
                .then(|| noisy(&mut rng, truth, item.max_score, noise));
            let response_id = format!("{}-r{:05}", item.item_id, j + 1);
            planted.insert(response_id.clone(), truth);
            responses.push(Response {
                response_id,
                item_id: item.item_id.clone(),
                text,
                rater1,
                rater2,
                gender: Some(gender),
                ethnicity: Some(ethnicity),
            });
        }
    }

    Ok(SyntheticCorpus {
        items,
        responses,
        planted,
        keywords,
    })
}

fn noisy(rng: &mut Rng, truth: u8, max_score: u8, rate: f64) -> u8 {
    if rate > 0.0 && rng.random_bool(rate) {
        let others: Vec<u8> = (1..=max_score).filter(|&s| s != truth).collect();
        *others.choose(rng).expect("at least two classes")
    } else {
        truth
    }
}
