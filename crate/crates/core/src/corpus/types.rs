use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseFormat {
    Short,
    Extended,
}

/// One scoring task: a passage, a question and a valid score range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    pub grade: u8,
    pub passage_text: String,
    pub question_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rubric_text: Option<String>,
    pub min_score: u8,
    pub max_score: u8,
    pub response_format: ResponseFormat,
    /// Equal for cross-grade items sharing passage and question.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_key: Option<String>,
}

impl Item {
    pub fn num_classes(&self) -> usize {
        (self.max_score - self.min_score + 1) as usize
    }

    pub fn scores(&self) -> impl Iterator<Item = u8> {
        self.min_score..=self.max_score
    }

    pub fn contains(&self, score: u8) -> bool {
        (self.min_score..=self.max_score).contains(&score)
    }

    pub fn is_shared(&self) -> bool {
        self.link_key.is_some()
    }

    /// Boolean mask over the global classes 1..=4.
    pub fn valid_mask(&self) -> [bool; NUM_CLASSES] {
        let mut mask = [false; NUM_CLASSES];
        for s in self.scores() {
            mask[(s - 1) as usize] = true;
        }
        mask
    }

    pub fn validate(&self) -> Result<()> {
        if self.item_id.is_empty() {
            return Err(Error::Validation("item with empty item_id".into()));
        }
        if self.grade != 4 && self.grade != 8 {
            return Err(Error::Validation(format!(
                "item {}: grade {} is not 4 or 8",
                self.item_id, self.grade
            )));
        }
        if self.min_score != 1
            || self.max_score <= self.min_score
            || self.max_score as usize > NUM_CLASSES
        {
            return Err(Error::Validation(format!(
                "item {}: score range {}..={} must satisfy 1 = min < max <= {}",
                self.item_id, self.min_score, self.max_score, NUM_CLASSES
            )));
        }
        Ok(())
    }
}

/// A student answer with one or two rater scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub response_id: String,
    pub item_id: String,
    pub text: String,
    pub rater1: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rater2: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ethnicity: Option<String>,
}

impl Response {
    pub fn is_double_scored(&self) -> bool {
        self.rater2.is_some()
    }
}

/// Single label for a response: the first rater wins on disagreement, and the
/// shared value is used when both raters agree.
pub fn adjudicate(r: &Response) -> u8 {
    match r.rater2 {
        Some(second) if second == r.rater1 => second,
        _ => r.rater1,
    }
}

/// Check item invariants, id uniqueness and link-key consistency.
pub fn validate_items(items: &[Item]) -> Result<()> {
    let mut seen = HashSet::new();
    for item in items {
        item.validate()?;
        if !seen.insert(item.item_id.as_str()) {
            return Err(Error::Validation(format!(
                "duplicate item_id {}",
                item.item_id
            )));
        }
    }
    for (key, group) in link_groups(items) {
        let first = items
            .iter()
            .find(|i| i.item_id == group[0])
            .expect("grouped id");
        for id in &group[1..] {
            let other = items.iter().find(|i| &i.item_id == id).expect("grouped id");
            if other.passage_text != first.passage_text
                || other.question_text != first.question_text
            {
                return Err(Error::Validation(format!(
                    "link_key {key}: items {} and {} differ in passage or question text",
                    first.item_id, other.item_id
                )));
            }
        }
    }
    Ok(())
}

/// Items grouped by link key, in key order. Only keys with at least two items
/// count as shared pairs.
pub fn link_groups(items: &[Item]) -> BTreeMap<String, Vec<String>> {
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for item in items {
        if let Some(key) = &item.link_key {
            groups
                .entry(key.clone())
                .or_default()
                .push(item.item_id.clone());
        }
    }
    groups.retain(|_, ids| ids.len() >= 2);
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    fn response(r1: u8, r2: Option<u8>) -> Response {
        Response {
            response_id: "r".into(),
            item_id: "i".into(),
            text: "t".into(),
            rater1: r1,
            rater2: r2,
            gender: None,
            ethnicity: None,
        }
    }

    #[test]
    fn adjudication_rule() {
        assert_eq!(adjudicate(&response(2, Some(3))), 2);
        assert_eq!(adjudicate(&response(2, None)), 2);
        assert_eq!(adjudicate(&response(3, Some(3))), 3);
    }

    #[test]
    fn adjudication_ignores_agreeing_second_rater() {
        for s in 1..=4 {
            assert_eq!(
                adjudicate(&response(s, Some(s))),
                adjudicate(&response(s, None))
            );
        }
    }

    #[test]
    fn valid_mask_matches_range() {
        let item = Item {
            item_id: "a".into(),
            grade: 4,
            passage_text: "p".into(),
            question_text: "q".into(),
            rubric_text: None,
            min_score: 1,
            max_score: 3,
            response_format: ResponseFormat::Short,
            link_key: None,
        };
        assert_eq!(item.valid_mask(), [true, true, true, false]);
        assert_eq!(item.num_classes(), 3);
    }
}
