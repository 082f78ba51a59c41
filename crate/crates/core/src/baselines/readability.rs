use serde::{Deserialize, Serialize};

use super::lexicon::WordList;
use crate::textprep::split_sentences;

/// The five readability indices; `degenerate` marks text without words or
/// sentences, for which every index is 0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Readability {
    pub ari: f64,
    pub coleman_liau: f64,
    pub dale_chall: f64,
    pub smog: f64,
    pub flesch: f64,
    pub degenerate: bool,
}

/// Whitespace-separated tokens with leading and trailing punctuation removed;
/// tokens that are pure punctuation are not words.
pub fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_string())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Sentences that contain at least one word.
pub fn sentence_count(text: &str) -> usize {
    split_sentences(text)
        .iter()
        .filter(|s| !words(s).is_empty())
        .count()
}

/// Vowel groups (a e i o u y), minus a silent final e, at least 1.
pub fn syllables(word: &str) -> usize {
    let w: Vec<char> = word
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphabetic())
        .collect();
    if w.is_empty() {
        return 0;
    }
    let vowel = |c: char| "aeiouy".contains(c);
    let mut count = 0;
    let mut prev = false;
    for &c in &w {
        let v = vowel(c);
        if v && !prev {
            count += 1;
        }
        prev = v;
    }
    let n = w.len();
    if count > 1 && w[n - 1] == 'e' && !(n >= 2 && w[n - 2] == 'l' && n >= 3 && !vowel(w[n - 3])) {
        count -= 1;
    }
    count.max(1)
}

fn letters_and_digits(word: &str) -> usize {
    word.chars().filter(|c| c.is_alphanumeric()).count()
}

pub fn readability(text: &str, easy_words: &WordList) -> Readability {
    let ws = words(text);
    let n_sent = sentence_count(text);
    if ws.is_empty() || n_sent == 0 {
        return Readability {
            degenerate: true,
            ..Readability::default()
        };
    }
    let w = ws.len() as f64;
    let s = n_sent as f64;
    let chars: usize = ws.iter().map(|x| letters_and_digits(x)).sum();
    let syl: Vec<usize> = ws.iter().map(|x| syllables(x)).collect();
    let total_syl: usize = syl.iter().sum();
    let poly = syl.iter().filter(|&&k| k >= 3).count() as f64;
    let difficult = ws.iter().filter(|x| !easy_words.contains(x)).count() as f64;

    let ari = 4.71 * (chars as f64 / w) + 0.5 * (w / s) - 21.43;
    let l = chars as f64 / w * 100.0;
    let s100 = s / w * 100.0;
    let coleman_liau = 0.0588 * l - 0.296 * s100 - 15.8;
    let pct_difficult = difficult / w * 100.0;
    let mut dale_chall = 0.1579 * pct_difficult + 0.0496 * (w / s);
    if pct_difficult > 5.0 {
        dale_chall += 3.6365;
    }
    let smog = 1.0430 * (poly * 30.0 / s).sqrt() + 3.1291;
    let flesch = 206.835 - 1.015 * (w / s) - 84.6 * (total_syl as f64 / w);
    Readability {
        ari,
        coleman_liau,
        dale_chall,
        smog,
        flesch,
        degenerate: false,
    }
}
