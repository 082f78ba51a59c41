//! Reference dictionary spell checker.
//!
//! Out-of-dictionary words with at least one dictionary neighbour at
//! optimal-string-alignment distance 1 (one insertion, deletion, substitution
//! or adjacent transposition) are replaced by the most frequent such
//! neighbour, ties broken lexicographically. Everything else passes through.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub trait SpellChecker: Send + Sync {
    fn correct(&self, text: &str) -> String;
}

pub fn correct_spelling(text: &str, checker: &dyn SpellChecker) -> String {
    checker.correct(text)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DictionaryChecker {
    freq: HashMap<String, u64>,
}

impl DictionaryChecker {
    pub fn new(freq: HashMap<String, u64>) -> Self {
        DictionaryChecker {
            freq: freq
                .into_iter()
                .map(|(w, f)| (w.to_lowercase(), f))
                .collect(),
        }
    }

    /// Dictionary file: one word per line with an optional whitespace-separated
    /// frequency column (default 1).
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut freq = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let mut cols = line.split_whitespace();
            let Some(word) = cols.next() else { continue };
            let f = match cols.next() {
                Some(c) => c.parse::<u64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    message: format!("bad frequency {c:?}: {e}"),
                })?,
                None => 1,
            };
            *freq.entry(word.to_lowercase()).or_insert(0) += f;
        }
        Ok(Self::new(freq))
    }

    /// Words seen at least `min_count` times in `texts`, with their counts.
    pub fn from_corpus<'a>(texts: impl IntoIterator<Item = &'a str>, min_count: u64) -> Self {
        let mut freq: HashMap<String, u64> = HashMap::new();
        for text in texts {
            for w in text.split_whitespace() {
                let (_, core, _) = split_core(w);
                if is_word(core) {
                    *freq.entry(core.to_lowercase()).or_default() += 1;
                }
            }
        }
        freq.retain(|_, c| *c >= min_count);
        DictionaryChecker { freq }
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }

    /// Word frequencies in sorted order.
    pub fn frequencies(&self) -> std::collections::BTreeMap<String, u64> {
        self.freq.iter().map(|(w, &f)| (w.clone(), f)).collect()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.freq.contains_key(&word.to_lowercase())
    }

    fn best_neighbor(&self, lower: &str) -> Option<&str> {
        let mut best: Option<(&str, u64)> = None;
        for cand in edits1(lower) {
            if let Some((word, &f)) = self.freq.get_key_value(cand.as_str()) {
                let better = match best {
                    None => true,
                    Some((bw, bf)) => f > bf || (f == bf && word.as_str() < bw),
                };
                if better {
                    best = Some((word.as_str(), f));
                }
            }
        }
        best.map(|(w, _)| w)
    }

    fn correct_word(&self, core: &str) -> Option<String> {
        if !is_word(core) {
            return None;
        }
        let lower = core.to_lowercase();
        if self.freq.contains_key(&lower) {
            return None;
        }
        let fix = self.best_neighbor(&lower)?;
        let upper_first = core.chars().next().is_some_and(char::is_uppercase);
        let mut out = fix.to_string();
        if upper_first {
            if let Some(c) = fix.chars().next() {
                let up: String = c.to_uppercase().collect();
                out.replace_range(..c.len_utf8(), &up);
            }
        }
        Some(out)
    }
}

impl SpellChecker for DictionaryChecker {
    fn correct(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        let mut rest = text;
        while !rest.is_empty() {
            let ws = rest.len() - rest.trim_start().len();
            out.push_str(&rest[..ws]);
            rest = &rest[ws..];
            let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
            let token = &rest[..end];
            let (lead, core, trail) = split_core(token);
            match self.correct_word(core) {
                Some(fixed) => {
                    out.push_str(lead);
                    out.push_str(&fixed);
                    out.push_str(trail);
                }
                None => out.push_str(token),
            }
            rest = &rest[end..];
        }
        out
    }
}

fn is_word(core: &str) -> bool {
    !core.is_empty() && core.chars().all(|c| c.is_alphabetic() || c == '\'')
}

/// Split leading and trailing non-alphanumeric characters off a token.
fn split_core(token: &str) -> (&str, &str, &str) {
    let start = token
        .find(|c: char| c.is_alphanumeric())
        .unwrap_or(token.len());
    let end = token
        .rfind(|c: char| c.is_alphanumeric())
        .map(|i| i + token[i..].chars().next().map_or(1, char::len_utf8))
        .unwrap_or(start);
    (
        &token[..start],
        &token[start..end.max(start)],
        &token[end.max(start)..],
    )
}

const ALPHABET: &str = "abcdefghijklmnopqrstuvwxyz";

/// All strings at optimal-string-alignment distance 1.
fn edits1(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    let mut out = Vec::with_capacity(54 * n + 25);
    let build = |v: Vec<char>| v.into_iter().collect::<String>();
    for i in 0..n {
        let mut v = chars.clone();
        v.remove(i);
        out.push(build(v));
    }
    for i in 0..n.saturating_sub(1) {
        let mut v = chars.clone();
        v.swap(i, i + 1);
        out.push(build(v));
    }
    for i in 0..n {
        for c in ALPHABET.chars() {
            if c != chars[i] {
                let mut v = chars.clone();
                v[i] = c;
                out.push(build(v));
            }
        }
    }
    for i in 0..=n {
        for c in ALPHABET.chars() {
            let mut v = chars.clone();
            v.insert(i, c);
            out.push(build(v));
        }
    }
    out
}

/// Optimal string alignment distance (Levenshtein plus adjacent transposition).
pub fn osa_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            let mut v = (d[i - 1][j] + 1)
                .min(d[i][j - 1] + 1)
                .min(d[i - 1][j - 1] + cost);
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                v = v.min(d[i - 2][j - 2] + 1);
            }
            d[i][j] = v;
        }
    }
    d[a.len()][b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference() -> DictionaryChecker {
        let freq = [
            ("the", 500),
            ("cat", 40),
            ("ten", 30),
            ("tea", 20),
            ("sat", 10),
            ("hat", 10),
            ("bat", 10),
        ];
        DictionaryChecker::new(freq.iter().map(|(w, f)| (w.to_string(), *f)).collect())
    }

    #[test]
    fn corrects_transposition() {
        assert_eq!(correct_spelling("teh cat", &reference()), "the cat");
    }

    #[test]
    fn leaves_known_and_hopeless_words() {
        let c = reference();
        assert_eq!(correct_spelling("the cat", &c), "the cat");
        assert_eq!(correct_spelling("xqzv cat", &c), "xqzv cat");
    }

    #[test]
    fn tie_breaks_by_frequency_then_lexicographic() {
        // "zat" neighbours: bat, cat, hat, sat; cat is most frequent
        assert_eq!(correct_spelling("zat", &reference()), "cat");
        // "gat" without cat in the dictionary: bat/hat/sat tie on 10, bat wins
        let mut freq: HashMap<String, u64> = reference().freq;
        freq.remove("cat");
        assert_eq!(
            correct_spelling("gat", &DictionaryChecker::new(freq)),
            "bat"
        );
    }

    #[test]
    fn keeps_case_punctuation_and_spacing() {
        assert_eq!(
            correct_spelling("Teh cat,  teh!", &reference()),
            "The cat,  the!"
        );
    }

    #[test]
    fn dictionary_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("dict.txt");
        std::fs::write(&p, "the 10\ncat\n\n").unwrap();
        let c = DictionaryChecker::load(&p).unwrap();
        assert!(c.contains("The") && c.contains("cat"));
        std::fs::write(&p, "the x\n").unwrap();
        assert!(matches!(
            DictionaryChecker::load(&p),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn edits_are_distance_one() {
        for e in edits1("teh") {
            assert!(osa_distance("teh", &e) <= 1, "{e}");
        }
        assert_eq!(osa_distance("teh", "the"), 1);
    }

    proptest! {
        #[test]
        fn word_count_preserved(words in proptest::collection::vec("[a-z]{1,6}", 0..12)) {
            let text = words.join(" ");
            let fixed = reference().correct(&text);
            prop_assert_eq!(fixed.split_whitespace().count(), text.split_whitespace().count());
            for (a, b) in text.split_whitespace().zip(fixed.split_whitespace()) {
                if reference().contains(a) {
                    prop_assert_eq!(a, b);
                }
            }
        }
    }
}
