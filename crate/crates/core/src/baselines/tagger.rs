//! Suffix-heuristic part-of-speech tagger and lemmatizer. Closed-class words
//! and frequent irregular forms come from a small exception lexicon; open-class
//! words are tagged by suffix, defaulting to noun.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Noun,
    Verb,
    Adjective,
    Adverb,
    Conjunction,
    Other,
}

pub trait PosTagger: Send + Sync {
    /// One tag per input word.
    fn tag(&self, words: &[String]) -> Vec<Tag>;
    fn lemma(&self, word: &str) -> String;
}

const CONJUNCTIONS: &str =
    "and but or nor yet so because although though while if unless since whereas whether";
const OTHER: &str = "a an the this that these those my your his her its our their i you he she it we they me him \
us them who whom whose which what in on at by for with about against between into through during before after \
above below to from up down of off over under again further then once here there when where why how all any \
both each few more most other some such no not only own same than too very can will just should would could \
might must shall may one two three four five six seven eight nine ten";
const VERBS: &str = "is are was were be been being am have has had do does did go goes went gone say says said \
get got make made know knew known think thought take took taken see saw seen come came give gave given find \
found tell told feel felt become became leave left run ran keep kept let begin began seem help show hear heard \
play move live believe hold bring brought write wrote stand stood lose lost pay paid meet met sit sat speak \
spoke read grow grew want like use try ask need look";
const ADJECTIVES: &str = "good bad new old great big small little long short high low young large important \
different early late hard easy happy sad kind brave honest strong weak right wrong best better worse worst \
real true false full empty poor rich";
const ADVERBS: &str =
    "also often never always sometimes still even ever already soon now later almost quite \
rather well fast";

const IRREGULAR_LEMMAS: &[(&str, &str)] = &[
    ("is", "be"),
    ("are", "be"),
    ("was", "be"),
    ("were", "be"),
    ("been", "be"),
    ("being", "be"),
    ("am", "be"),
    ("has", "have"),
    ("had", "have"),
    ("does", "do"),
    ("did", "do"),
    ("went", "go"),
    ("gone", "go"),
    ("said", "say"),
    ("got", "get"),
    ("made", "make"),
    ("knew", "know"),
    ("thought", "think"),
    ("took", "take"),
    ("saw", "see"),
    ("came", "come"),
    ("gave", "give"),
    ("found", "find"),
    ("told", "tell"),
    ("felt", "feel"),
    ("children", "child"),
    ("men", "man"),
    ("women", "woman"),
    ("feet", "foot"),
    ("mice", "mouse"),
    ("better", "good"),
    ("best", "good"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SuffixTagger {
    lexicon: HashMap<String, Tag>,
    lemmas: HashMap<String, String>,
}

impl Default for SuffixTagger {
    fn default() -> Self {
        let mut lexicon = HashMap::new();
        for (list, tag) in [
            (OTHER, Tag::Other),
            (VERBS, Tag::Verb),
            (ADJECTIVES, Tag::Adjective),
            (ADVERBS, Tag::Adverb),
            (CONJUNCTIONS, Tag::Conjunction),
        ] {
            for w in list.split_whitespace() {
                lexicon.insert(w.to_string(), tag);
            }
        }
        let lemmas = IRREGULAR_LEMMAS
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        SuffixTagger { lexicon, lemmas }
    }
}

impl SuffixTagger {
    /// Add exceptions from a file of `word tag` lines, tag one of noun, verb,
    /// adjective, adverb, conjunction, other.
    pub fn with_lexicon_file(mut self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (n, line) in text.lines().enumerate() {
            let mut cols = line.split_whitespace();
            let (Some(word), Some(tag)) = (cols.next(), cols.next()) else {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    message: "expected `word tag`".into(),
                });
            };
            let tag = match tag {
                "noun" => Tag::Noun,
                "verb" => Tag::Verb,
                "adjective" => Tag::Adjective,
                "adverb" => Tag::Adverb,
                "conjunction" => Tag::Conjunction,
                "other" => Tag::Other,
                t => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: n + 1,
                        message: format!("unknown tag {t:?}"),
                    })
                }
            };
            self.lexicon.insert(word.to_lowercase(), tag);
        }
        Ok(self)
    }

    fn tag_word(&self, word: &str) -> Tag {
        let w = word.to_lowercase();
        if let Some(&t) = self.lexicon.get(&w) {
            return t;
        }
        if w.is_empty() || !w.chars().any(char::is_alphabetic) {
            return Tag::Other;
        }
        let ends = |suffixes: &[&str]| {
            suffixes
                .iter()
                .any(|s| w.len() > s.len() + 1 && w.ends_with(s))
        };
        if ends(&["ly"]) {
            Tag::Adverb
        } else if ends(&["ing", "ed", "ize", "ise", "ify", "ate", "en"]) {
            Tag::Verb
        } else if ends(&[
            "ous", "ful", "ive", "able", "ible", "less", "ish", "ical", "al", "ic", "est", "y",
        ]) {
            Tag::Adjective
        } else {
            Tag::Noun
        }
    }
}

impl PosTagger for SuffixTagger {
    fn tag(&self, words: &[String]) -> Vec<Tag> {
        words.iter().map(|w| self.tag_word(w)).collect()
    }

    fn lemma(&self, word: &str) -> String {
        let w = word.to_lowercase();
        if let Some(l) = self.lemmas.get(&w) {
            return l.clone();
        }
        let n = w.len();
        let strip = |k: usize| w[..n - k].to_string();
        if n > 4 && w.ends_with("ies") {
            format!("{}y", &w[..n - 3])
        } else if n > 4
            && (w.ends_with("ches")
                || w.ends_with("shes")
                || w.ends_with("sses")
                || w.ends_with("xes"))
        {
            strip(2)
        } else if n > 3
            && w.ends_with('s')
            && !w.ends_with("ss")
            && !w.ends_with("us")
            && !w.ends_with("is")
        {
            strip(1)
        } else if n > 5 && w.ends_with("ing") {
            strip(3)
        } else if n > 4 && w.ends_with("ied") {
            format!("{}y", &w[..n - 3])
        } else if n > 4 && w.ends_with("ed") {
            strip(2)
        } else {
            w
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn tags_closed_and_suffix_classes() {
        let t = SuffixTagger::default();
        let tags = t.tag(&words("The merchant quickly jumped and was generous"));
        assert_eq!(
            tags,
            vec![
                Tag::Other,
                Tag::Noun,
                Tag::Adverb,
                Tag::Verb,
                Tag::Conjunction,
                Tag::Verb,
                Tag::Adjective
            ]
        );
    }

    #[test]
    fn length_preserved() {
        let t = SuffixTagger::default();
        let w = words("a b c 42 !");
        assert_eq!(t.tag(&w).len(), w.len());
    }

    #[test]
    fn lemmas() {
        let t = SuffixTagger::default();
        assert_eq!(t.lemma("stories"), "story");
        assert_eq!(t.lemma("foxes"), "fox");
        assert_eq!(t.lemma("Cats"), "cat");
        assert_eq!(t.lemma("jumping"), "jump");
        assert_eq!(t.lemma("went"), "go");
        assert_eq!(t.lemma("glass"), "glass");
    }

    #[test]
    fn lexicon_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lex.txt");
        std::fs::write(&p, "merchant verb\n").unwrap();
        let t = SuffixTagger::default().with_lexicon_file(&p).unwrap();
        assert_eq!(t.tag(&words("merchant")), vec![Tag::Verb]);
        std::fs::write(&p, "merchant thing\n").unwrap();
        assert!(SuffixTagger::default().with_lexicon_file(&p).is_err());
    }
}
