use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Item;
use crate::{Error, Result};

pub const UNKNOWN_GROUP: &str = "unknown";

/// One scored test response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub response_id: String,
    pub item_id: String,
    pub predicted: u8,
    pub truth: u8,
    pub gender: Option<String>,
    pub ethnicity: Option<String>,
}

impl EvalRecord {
    pub fn validate(&self, item: &Item) -> Result<()> {
        if !item.contains(self.predicted) || !item.contains(self.truth) {
            return Err(Error::Validation(format!(
                "record {}: scores {}/{} outside {}..={}",
                self.response_id, self.predicted, self.truth, item.min_score, item.max_score
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Gender,
    Ethnicity,
    Combined,
}

impl Grouping {
    /// Group label; records missing a needed attribute fall under "unknown".
    pub fn label(self, r: &EvalRecord) -> String {
        let known = |v: &Option<String>| v.clone().filter(|s| !s.is_empty());
        match self {
            Grouping::Gender => known(&r.gender),
            Grouping::Ethnicity => known(&r.ethnicity),
            Grouping::Combined => match (known(&r.gender), known(&r.ethnicity)) {
                (Some(g), Some(e)) => Some(format!("{g} {e}")),
                _ => None,
            },
        }
        .unwrap_or_else(|| UNKNOWN_GROUP.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBias {
    pub group: String,
    pub count: usize,
    /// Mean of predicted minus true score.
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub grouping: Grouping,
    pub groups: Vec<GroupBias>,
    pub overall_bias: f64,
    pub overall_count: usize,
}

impl BiasReport {
    pub fn group(&self, name: &str) -> Option<&GroupBias> {
        self.groups.iter().find(|g| g.group == name)
    }
}

pub fn bias_report(records: &[EvalRecord], grouping: Grouping) -> BiasReport {
    let mut sums: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    let mut total = 0.0;
    for r in records {
        let diff = r.predicted as f64 - r.truth as f64;
        total += diff;
        let e = sums.entry(grouping.label(r)).or_default();
        e.0 += 1;
        e.1 += diff;
    }
    BiasReport {
        grouping,
        groups: sums
            .into_iter()
            .map(|(group, (count, sum))| GroupBias {
                group,
                count,
                bias: sum / count as f64,
            })
            .collect(),
        overall_bias: if records.is_empty() {
            0.0
        } else {
            total / records.len() as f64
        },
        overall_count: records.len(),
    }
}
