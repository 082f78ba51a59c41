use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::corpus::Item;
use crate::seed;
use crate::textprep::truncate_tokens;
use crate::{Error, Result};

/// A scored training response available as an in-context example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub text: String,
    pub tokens: Vec<u32>,
    pub score: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub text: String,
    /// Already truncated to the example length limit.
    pub tokens: Vec<u32>,
    pub score: u8,
}

/// Sampled in-context examples for one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleSet {
    pub item_id: String,
    pub examples: Vec<Example>,
    pub seed: u64,
    /// Valid classes with no pool entry; the coverage floor is waived for them.
    pub missing_classes: Vec<u8>,
}

impl ExampleSet {
    pub fn empty(item_id: &str) -> Self {
        ExampleSet {
            item_id: item_id.to_string(),
            examples: Vec::new(),
            seed: 0,
            missing_classes: Vec::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.examples.len()
    }

    pub fn count_of(&self, score: u8) -> usize {
        self.examples.iter().filter(|e| e.score == score).count()
    }
}

/// For each valid class, draw `min(cap, available)` pool entries uniformly
/// without replacement, skipping entries whose text equals `exclude_text`.
/// Examples come out by ascending class, then draw order, with tokens cut to
/// `truncation`.
pub fn sample_examples(
    item: &Item,
    pool: &[PoolEntry],
    per_class_cap: usize,
    seed: u64,
    exclude_text: &str,
    truncation: usize,
) -> Result<ExampleSet> {
    let mut rng = seed::rng(seed, &[seed::label("examples"), seed::label(&item.item_id)]);
    let mut examples = Vec::new();
    let mut missing = Vec::new();
    let mut any = false;
    for class in item.scores() {
        let candidates: Vec<&PoolEntry> = pool
            .iter()
            .filter(|e| e.score == class && e.text != exclude_text)
            .collect();
        if candidates.is_empty() {
            missing.push(class);
            continue;
        }
        any = true;
        let take = per_class_cap.min(candidates.len());
        for i in index::sample(&mut rng, candidates.len(), take) {
            let e = candidates[i];
            examples.push(Example {
                text: e.text.clone(),
                tokens: truncate_tokens(&e.tokens, truncation),
                score: class,
            });
        }
    }
    if !any {
        return Err(Error::Validation(format!(
            "item {}: no in-context examples available after excluding the target",
            item.item_id
        )));
    }
    if !missing.is_empty() {
        log::warn!(
            "item {}: no pool examples for classes {:?}; coverage waived",
            item.item_id,
            missing
        );
    }
    Ok(ExampleSet {
        item_id: item.item_id.clone(),
        examples,
        seed,
        missing_classes: missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ResponseFormat;

    fn item(max: u8) -> Item {
        Item {
            item_id: "it".into(),
            grade: 8,
            passage_text: "p".into(),
            question_text: "q".into(),
            rubric_text: None,
            min_score: 1,
            max_score: max,
            response_format: ResponseFormat::Extended,
            link_key: None,
        }
    }

    fn pool(counts: &[usize]) -> Vec<PoolEntry> {
        let mut out = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for j in 0..n {
                out.push(PoolEntry {
                    text: format!("class {} answer {j}", c + 1),
                    tokens: (0..(j as u32 % 90 + 1)).collect(),
                    score: c as u8 + 1,
                });
            }
        }
        out
    }

    #[test]
    fn cap_rule_counts() {
        let set = sample_examples(&item(3), &pool(&[100, 5, 1]), 25, 1, "", 70).unwrap();
        assert_eq!(
            (set.count_of(1), set.count_of(2), set.count_of(3)),
            (25, 5, 1)
        );
        assert_eq!(set.k(), 31);
        assert!(set.examples.iter().all(|e| e.tokens.len() <= 70));
        assert!(set.examples.windows(2).all(|w| w[0].score <= w[1].score));
    }

    #[test]
    fn cap_one_gives_one_per_class() {
        let set = sample_examples(&item(3), &pool(&[4, 4, 4]), 1, 2, "", 70).unwrap();
        assert_eq!(set.k(), 3);
        assert_eq!(
            set.examples.iter().map(|e| e.score).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let p = pool(&[50, 50]);
        let a = sample_examples(&item(2), &p, 3, 9, "", 70).unwrap();
        assert_eq!(a, sample_examples(&item(2), &p, 3, 9, "", 70).unwrap());
        assert_ne!(
            a.examples,
            sample_examples(&item(2), &p, 3, 10, "", 70)
                .unwrap()
                .examples
        );
    }

    #[test]
    fn empty_class_waived_and_empty_pool_errors() {
        let set = sample_examples(&item(3), &pool(&[3, 0, 2]), 5, 0, "", 70).unwrap();
        assert_eq!(set.missing_classes, vec![2]);
        let only = pool(&[1]);
        assert!(sample_examples(&item(2), &only, 5, 0, &only[0].text, 70).is_err());
    }

    #[test]
    fn excluded_target_never_returned() {
        let p = pool(&[3, 3]);
        let target = p[1].text.clone();
        for s in 0..50 {
            let set = sample_examples(&item(2), &p, 5, s, &target, 70).unwrap();
            assert!(set.examples.iter().all(|e| e.text != target));
        }
    }
}
