use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::types::{adjudicate, Item, Response};
use crate::seed;
use crate::{Error, Result};

/// Assignment of every response to one of `n_folds` folds, stratified per item
/// by adjudicated label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub assignment: BTreeMap<String, usize>,
    pub seed: u64,
}

/// One cross-validation rotation: which folds train, validate and test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rotation {
    pub test: usize,
    pub validation: usize,
    pub n_folds: usize,
}

impl Rotation {
    /// Rotation `r` tests on fold `r` and validates on fold `r + 1`.
    pub fn new(r: usize, n_folds: usize) -> Self {
        Rotation {
            test: r % n_folds,
            validation: (r + 1) % n_folds,
            n_folds,
        }
    }

    pub fn is_train(&self, fold: usize) -> bool {
        fold != self.test && fold != self.validation
    }
}

impl FoldPlan {
    pub fn fold_of(&self, response_id: &str) -> Option<usize> {
        self.assignment.get(response_id).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn rotations(&self) -> impl Iterator<Item = Rotation> + '_ {
        (0..self.n_folds).map(|r| Rotation::new(r, self.n_folds))
    }
}

/// Stratified k-fold assignment. Within each item, responses are grouped by
/// adjudicated label, shuffled, and dealt round-robin; the dealing position
/// carries over between classes and items so fold totals stay balanced.
pub fn make_folds(responses: &[Response], items: &[Item], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!(
            "fold count must be at least 2, got {k}"
        )));
    }
    let mut by_item: HashMap<&str, BTreeMap<u8, Vec<&Response>>> = HashMap::new();
    for r in responses {
        by_item
            .entry(r.item_id.as_str())
            .or_default()
            .entry(adjudicate(r))
            .or_default()
            .push(r);
    }

    let mut assignment = BTreeMap::new();
    let mut cursor = 0usize;
    for item in items {
        let classes = by_item.remove(item.item_id.as_str()).unwrap_or_default();
        let count: usize = classes.values().map(Vec::len).sum();
        if count < k {
            return Err(Error::Config(format!(
                "item {} has {count} responses, fewer than {k} folds",
                item.item_id
            )));
        }
        for (label, mut members) in classes {
            // stable order before shuffling so input order does not matter
            members.sort_by(|a, b| a.response_id.cmp(&b.response_id));
            let mut rng = seed::rng(seed, &[seed::label(&item.item_id), label as u64]);
            members.shuffle(&mut rng);
            for r in members {
                assignment.insert(r.response_id.clone(), cursor % k);
                cursor += 1;
            }
        }
    }
    if let Some((id, _)) = by_item.into_iter().next() {
        return Err(Error::Reference(format!(
            "responses reference unknown item {id}"
        )));
    }
    Ok(FoldPlan {
        n_folds: k,
        assignment,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ResponseFormat;

    fn item(id: &str) -> Item {
        Item {
            item_id: id.into(),
            grade: 4,
            passage_text: "p".into(),
            question_text: "q".into(),
            rubric_text: None,
            min_score: 1,
            max_score: 4,
            response_format: ResponseFormat::Extended,
            link_key: None,
        }
    }

    fn responses(item: &str, labels: &[u8]) -> Vec<Response> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| Response {
                response_id: format!("{item}-{i:03}"),
                item_id: item.into(),
                text: format!("answer {i}"),
                rater1: l,
                rater2: None,
                gender: None,
                ethnicity: None,
            })
            .collect()
    }

    #[test]
    fn exact_stratification_two_classes() {
        let rs = responses("a", &[1, 1, 1, 1, 1, 2, 2, 2, 2, 2]);
        let plan = make_folds(&rs, &[item("a")], 5, 3).unwrap();
        for fold in 0..5 {
            let labels: Vec<u8> = rs
                .iter()
                .filter(|r| plan.fold_of(&r.response_id) == Some(fold))
                .map(|r| r.rater1)
                .collect();
            assert_eq!(labels.len(), 2);
            assert!(labels.contains(&1) && labels.contains(&2));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let rs = responses("a", &[1, 2, 3, 1, 2, 3, 1, 2, 3, 4, 4, 1]);
        let a = make_folds(&rs, &[item("a")], 3, 11).unwrap();
        let b = make_folds(&rs, &[item("a")], 3, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn twenty_three_single_class_sizes() {
        let rs = responses("a", &[2; 23]);
        let plan = make_folds(&rs, &[item("a")], 5, 0).unwrap();
        let mut sizes = plan.fold_sizes();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![5, 5, 5, 4, 4]);
    }

    #[test]
    fn too_few_responses_is_config_error() {
        let rs = responses("a", &[1, 2, 1]);
        assert!(matches!(
            make_folds(&rs, &[item("a")], 5, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn rotation_roles() {
        let r = Rotation::new(4, 5);
        assert_eq!((r.test, r.validation), (4, 0));
        assert_eq!((0..5).filter(|&f| r.is_train(f)).count(), 3);
    }
}
