use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::metrics::{BiasReport, Grouping};
use crate::{Error, Result, NUM_CLASSES};

use super::config::Pairing;

/// One row of a prediction table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub run: String,
    pub approach: String,
    pub fold: Option<usize>,
    pub response_id: String,
    pub item_id: String,
    pub true_score: Option<u8>,
    pub predicted: u8,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub p3: Option<f64>,
    pub p4: Option<f64>,
    pub resamples: Option<usize>,
    pub conditioned: bool,
    /// Conditioning was requested but demographics were missing.
    pub conditioning_fallback: bool,
}

impl PredictionRow {
    pub fn set_probs(&mut self, probs: &[f64; NUM_CLASSES]) {
        self.p1 = Some(probs[0]);
        self.p2 = Some(probs[1]);
        self.p3 = Some(probs[2]);
        self.p4 = Some(probs[3]);
    }
}

const HEADER: [&str; 14] = [
    "run",
    "approach",
    "fold",
    "response_id",
    "item_id",
    "true_score",
    "predicted",
    "p1",
    "p2",
    "p3",
    "p4",
    "resamples",
    "conditioned",
    "conditioning_fallback",
];

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    w.write_record(HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub per_item_qwk: BTreeMap<String, f64>,
    pub mean_qwk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachResult {
    /// Kappa per item over all test folds pooled.
    pub per_item_qwk: BTreeMap<String, f64>,
    pub per_fold: Vec<FoldResult>,
    pub mean_qwk: f64,
    pub shared_mean_qwk: Option<f64>,
    pub non_shared_mean_qwk: Option<f64>,
    /// Every rotation finished.
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestEntry {
    pub approach: String,
    pub reference: String,
    pub pairing: Pairing,
    pub n: usize,
    pub mean_difference: f64,
    pub t: f64,
    pub p: f64,
    pub df: usize,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub approach: String,
    pub fold: usize,
    pub error: String,
}

/// Cross-validation results document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalReport {
    pub manifest_hash: String,
    pub config_hash: String,
    pub n_folds: usize,
    pub approaches: BTreeMap<String, ApproachResult>,
    pub human_agreement: BTreeMap<String, f64>,
    pub human_mean_qwk: Option<f64>,
    pub reference: String,
    pub t_tests: Vec<TTestEntry>,
    pub grouping: Grouping,
    pub bias: BTreeMap<String, BiasReport>,
    pub failures: Vec<Failure>,
    pub unimplemented_baselines: Vec<String>,
}

impl CrossvalReport {
    /// Plain-text table of aggregate kappas, one approach per line.
    pub fn summary_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        let width = self
            .approaches
            .keys()
            .map(String::len)
            .max()
            .unwrap_or(8)
            .max(8);
        let mut s = String::new();
        let _ = writeln!(s, "run {}", self.manifest_hash);
        let _ = writeln!(
            s,
            "{:<width$}  {:>8}  {:>8}  {:>10}",
            "approach", "all", "shared", "non-shared"
        );
        for (name, r) in &self.approaches {
            let _ = writeln!(
                s,
                "{:<width$}  {:>8}  {:>8}  {:>10}{}",
                name,
                fmt(Some(r.mean_qwk)),
                fmt(r.shared_mean_qwk),
                fmt(r.non_shared_mean_qwk),
                if r.complete { "" } else { "  (incomplete)" }
            );
        }
        if let Some(h) = self.human_mean_qwk {
            let _ = writeln!(s, "{:<width$}  {:>8}", "human", fmt(Some(h)));
        }
        for t in &self.t_tests {
            let _ = writeln!(
                s,
                "t-test {} vs {}: t = {:.4}, p = {:.4}{}",
                t.approach,
                t.reference,
                t.t,
                t.p,
                if t.degenerate { " (degenerate)" } else { "" }
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prediction_table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        let mut row = PredictionRow {
            run: "h".into(),
            approach: "a".into(),
            fold: Some(1),
            response_id: "r1".into(),
            item_id: "i1".into(),
            true_score: Some(2),
            predicted: 3,
            p1: None,
            p2: None,
            p3: None,
            p4: None,
            resamples: Some(8),
            conditioned: false,
            conditioning_fallback: false,
        };
        row.set_probs(&[0.1, 0.2, 0.7, 0.0]);
        write_predictions(&p, std::slice::from_ref(&row)).unwrap();
        assert_eq!(read_predictions(&p).unwrap(), vec![row]);
        write_predictions(&p, &[]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("run,approach,fold,response_id"));
    }
}
