//! Non-neural baselines: the majority-class scorer and a feature-engineering
//! scorer (length, lexical, part-of-speech and readability features fed to a
//! random forest trained per item).

mod features;
mod forest;
mod lexicon;
mod readability;
mod tagger;

pub use features::{
    extract_features, write_features_csv, FeatureExtractor, FeatureVector, FEATURE_NAMES,
    N_FEATURES,
};
pub use forest::{forest_fit, forest_predict, ForestConfig, ForestModel, Node, Tree};
pub use lexicon::WordList;
pub use readability::{readability, sentence_count, syllables, words, Readability};
pub use tagger::{PosTagger, SuffixTagger, Tag};

use std::collections::BTreeMap;

use crate::corpus::{adjudicate, Item, Response};
use crate::{seed, Error, Result};

/// Most frequent label; ties go to the lower score.
pub fn majority_fit(labels: &[u8]) -> Result<u8> {
    if labels.is_empty() {
        return Err(Error::Validation(
            "majority baseline: no training labels".into(),
        ));
    }
    let mut counts = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    let mut best = (0u8, 0usize);
    for (l, c) in counts {
        if c > best.1 {
            best = (l, c);
        }
    }
    Ok(best.0)
}

pub fn majority_predict(score: u8) -> u8 {
    score
}

/// Word lists and tagger for the feature baseline.
pub struct FeatureResources {
    pub tagger: Box<dyn PosTagger>,
    pub stopwords: WordList,
    pub easy_words: WordList,
}

impl Default for FeatureResources {
    fn default() -> Self {
        FeatureResources {
            tagger: Box::new(SuffixTagger::default()),
            stopwords: WordList::stopwords(),
            easy_words: WordList::easy_words(),
        }
    }
}

impl FeatureResources {
    pub fn extractor(&self) -> FeatureExtractor<'_> {
        FeatureExtractor {
            tagger: self.tagger.as_ref(),
            stopwords: &self.stopwords,
            easy_words: &self.easy_words,
        }
    }
}

fn by_item<'a>(rs: &[&'a Response]) -> BTreeMap<&'a str, Vec<&'a Response>> {
    let mut m: BTreeMap<&str, Vec<&Response>> = BTreeMap::new();
    for r in rs {
        m.entry(r.item_id.as_str()).or_default().push(r);
    }
    m
}

/// Majority-class predictions for `test`, one model per item.
pub fn majority_baseline(train: &[&Response], test: &[&Response]) -> Result<BTreeMap<String, u8>> {
    let train = by_item(train);
    test.iter()
        .map(|r| {
            let labels: Vec<u8> = train
                .get(r.item_id.as_str())
                .map(|v| v.iter().map(|x| adjudicate(x)).collect())
                .unwrap_or_default();
            Ok((
                r.response_id.clone(),
                majority_predict(majority_fit(&labels)?),
            ))
        })
        .collect()
}

/// Feature-engineering predictions for `test`, one forest per item.
pub fn feature_baseline(
    items: &[Item],
    train: &[&Response],
    test: &[&Response],
    cfg: &ForestConfig,
    seed_value: u64,
    resources: &FeatureResources,
) -> Result<BTreeMap<String, u8>> {
    let ex = resources.extractor();
    let train = by_item(train);
    let test = by_item(test);
    let mut out = BTreeMap::new();
    for item in items {
        let Some(tests) = test.get(item.item_id.as_str()) else {
            continue;
        };
        let rows = train
            .get(item.item_id.as_str())
            .cloned()
            .unwrap_or_default();
        let x: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| ex.extract(&r.text).to_array().to_vec())
            .collect();
        let y: Vec<u8> = rows.iter().map(|r| adjudicate(r)).collect();
        let model = forest_fit(
            &x,
            &y,
            item.min_score,
            item.max_score,
            cfg,
            seed::derive(
                seed_value,
                &[seed::label("forest"), seed::label(&item.item_id)],
            ),
        )?;
        for r in tests {
            let f = ex.extract(&r.text).to_array();
            out.insert(r.response_id.clone(), forest_predict(&model, &f));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::qwk;
    use rand::Rng;

    #[test]
    fn majority_rules() {
        assert_eq!(majority_fit(&[1, 1, 2]).unwrap(), 1);
        assert_eq!(majority_fit(&[1, 2]).unwrap(), 1);
        assert_eq!(majority_fit(&[3, 3, 3]).unwrap(), 3);
        assert!(majority_fit(&[]).is_err());
    }

    #[test]
    fn majority_qwk_near_zero() {
        let mut rng = seed::rng(5, &[]);
        let train: Vec<u8> = (0..10_000).map(|_| rng.random_range(1..=4)).collect();
        let test: Vec<u8> = (0..10_000).map(|_| rng.random_range(1..=4)).collect();
        let m = majority_fit(&train).unwrap();
        let pred = vec![majority_predict(m); test.len()];
        assert!(qwk(&test, &pred, 1, 4).unwrap().abs() <= 0.05);
    }
}
