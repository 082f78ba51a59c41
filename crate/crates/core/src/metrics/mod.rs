//! Agreement and fairness metrics: quadratic weighted kappa, human
//! inter-rater agreement, per-item aggregation, paired t-tests and
//! demographic prediction bias.

mod bias;
mod ttest;

pub use bias::{bias_report, BiasReport, EvalRecord, GroupBias, Grouping, UNKNOWN_GROUP};
pub use ttest::{paired_t_test, TTest};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Item, Response};
use crate::{Error, Result};

/// A kappa value; `degenerate` marks the all-one-class case scored as 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub value: f64,
    pub degenerate: bool,
}

/// Quadratic weighted kappa over the score range `s_min..=s_max`.
pub fn qwk(truth: &[u8], pred: &[u8], s_min: u8, s_max: u8) -> Result<f64> {
    qwk_flagged(truth, pred, s_min, s_max).map(|k| k.value)
}

pub fn qwk_flagged(truth: &[u8], pred: &[u8], s_min: u8, s_max: u8) -> Result<Kappa> {
    if truth.len() != pred.len() {
        return Err(Error::Validation(format!(
            "qwk: {} true scores but {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Validation("qwk: no scores".into()));
    }
    if s_max <= s_min {
        return Err(Error::Validation(format!(
            "qwk: range {s_min}..={s_max} has a single class"
        )));
    }
    let n = (s_max - s_min + 1) as usize;
    if let Some(bad) = truth.iter().chain(pred).find(|&&s| s < s_min || s > s_max) {
        return Err(Error::Validation(format!(
            "qwk: score {bad} outside {s_min}..={s_max}"
        )));
    }

    let total = truth.len() as f64;
    let mut observed = vec![vec![0.0; n]; n];
    let mut rows = vec![0.0; n];
    let mut cols = vec![0.0; n];
    for (&t, &p) in truth.iter().zip(pred) {
        let (a, b) = ((t - s_min) as usize, (p - s_min) as usize);
        observed[a][b] += 1.0 / total;
        rows[a] += 1.0 / total;
        cols[b] += 1.0 / total;
    }
    let denom = ((n - 1) * (n - 1)) as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for a in 0..n {
        for b in 0..n {
            let w = ((a as f64) - (b as f64)).powi(2) / denom;
            num += w * observed[a][b];
            den += w * rows[a] * cols[b];
        }
    }
    if den == 0.0 {
        return Ok(Kappa {
            value: 1.0,
            degenerate: true,
        });
    }
    Ok(Kappa {
        value: 1.0 - num / den,
        degenerate: false,
    })
}

/// Unweighted mean of the per-item values selected by `keep`.
pub fn mean_qwk(per_item: &BTreeMap<String, f64>, keep: impl Fn(&str) -> bool) -> Result<f64> {
    let vals: Vec<f64> = per_item
        .iter()
        .filter(|(k, _)| keep(k))
        .map(|(_, &v)| v)
        .collect();
    if vals.is_empty() {
        return Err(Error::Validation("mean_qwk: no items selected".into()));
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Kappa between the two human raters over the item's double-scored responses.
pub fn rater_agreement(responses: &[Response], item: &Item) -> Result<f64> {
    let (r1, r2): (Vec<u8>, Vec<u8>) = responses
        .iter()
        .filter(|r| r.item_id == item.item_id)
        .filter_map(|r| r.rater2.map(|s| (r.rater1, s)))
        .unzip();
    if r1.len() < 2 {
        return Err(Error::Validation(format!(
            "item {}: {} double-scored responses, need at least 2",
            item.item_id,
            r1.len()
        )));
    }
    qwk(&r1, &r2, item.min_score, item.max_score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ResponseFormat;

    /// Textbook kappa: weights and expected counts over raw frequencies.
    fn oracle(truth: &[u8], pred: &[u8], lo: u8, hi: u8) -> f64 {
        let n = (hi - lo + 1) as usize;
        let mut conf = vec![vec![0u64; n]; n];
        for (&t, &p) in truth.iter().zip(pred) {
            conf[(t - lo) as usize][(p - lo) as usize] += 1;
        }
        let total: u64 = conf.iter().flatten().sum();
        let row = |i: usize| conf[i].iter().sum::<u64>() as f64;
        let col = |j: usize| conf.iter().map(|r| r[j]).sum::<u64>() as f64;
        let (mut o, mut e) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let w = ((i as f64 - j as f64) / (n as f64 - 1.0)).powi(2);
                o += w * conf[i][j] as f64;
                e += w * row(i) * col(j) / total as f64;
            }
        }
        if e == 0.0 {
            1.0
        } else {
            1.0 - o / e
        }
    }

    #[test]
    fn worked_examples() {
        assert_eq!(qwk(&[1, 2, 3, 1], &[1, 2, 3, 1], 1, 3).unwrap(), 1.0);
        assert_eq!(qwk(&[1, 2], &[2, 1], 1, 2).unwrap(), -1.0);
        // observed marginals give 0.5 here
        let v = qwk(&[1, 1, 2, 2], &[1, 2, 2, 2], 1, 2).unwrap();
        assert!((v - oracle(&[1, 1, 2, 2], &[1, 2, 2, 2], 1, 2)).abs() < 1e-12);
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_flag() {
        let k = qwk_flagged(&[2, 2, 2], &[2, 2, 2], 1, 3).unwrap();
        assert_eq!(k.value, 1.0);
        assert!(k.degenerate);
    }

    #[test]
    fn errors() {
        assert!(qwk(&[1], &[1, 2], 1, 2).is_err());
        assert!(qwk(&[1, 5], &[1, 2], 1, 4).is_err());
        assert!(qwk(&[1], &[1], 1, 1).is_err());
        assert!(qwk(&[], &[], 1, 2).is_err());
    }

    #[test]
    fn constant_prediction_is_zero() {
        let v = qwk(&[1, 2, 3, 1, 2], &[2, 2, 2, 2, 2], 1, 3).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn mean_and_filter() {
        let m: BTreeMap<String, f64> = [("a".to_string(), 0.8), ("b".to_string(), 0.9)].into();
        assert!((mean_qwk(&m, |_| true).unwrap() - 0.85).abs() < 1e-12);
        assert_eq!(mean_qwk(&m, |k| k == "a").unwrap(), 0.8);
        assert!(mean_qwk(&m, |_| false).is_err());

        let mut all = BTreeMap::new();
        for i in 0..10 {
            all.insert(format!("i{i}"), i as f64);
        }
        let shared = |k: &str| k[1..].parse::<usize>().unwrap() < 8;
        assert_eq!(
            mean_qwk(&all, shared).unwrap(),
            (0..8).sum::<usize>() as f64 / 8.0
        );
    }

    fn resp(id: &str, r1: u8, r2: Option<u8>) -> Response {
        Response {
            response_id: id.into(),
            item_id: "it".into(),
            text: String::new(),
            rater1: r1,
            rater2: r2,
            gender: None,
            ethnicity: None,
        }
    }

    #[test]
    fn agreement_uses_double_scored_only() {
        let item = Item {
            item_id: "it".into(),
            grade: 4,
            passage_text: "p".into(),
            question_text: "q".into(),
            rubric_text: None,
            min_score: 1,
            max_score: 2,
            response_format: ResponseFormat::Short,
            link_key: None,
        };
        let rs = vec![
            resp("a", 1, Some(2)),
            resp("b", 2, Some(1)),
            resp("c", 1, None),
        ];
        assert_eq!(rater_agreement(&rs, &item).unwrap(), -1.0);
        let agree = vec![
            resp("a", 1, Some(1)),
            resp("b", 2, Some(2)),
            resp("c", 2, None),
        ];
        assert_eq!(rater_agreement(&agree, &item).unwrap(), 1.0);
        assert!(rater_agreement(&rs[..1], &item).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pairs() -> impl Strategy<Value = (Vec<u8>, Vec<u8>, u8)> {
            (2u8..=4).prop_flat_map(|n| {
                (1usize..=50).prop_flat_map(move |len| {
                    (
                        proptest::collection::vec(1..=n, len),
                        proptest::collection::vec(1..=n, len),
                        Just(n),
                    )
                })
            })
        }

        proptest! {
            #[test]
            fn matches_oracle((t, p, n) in pairs()) {
                let v = qwk(&t, &p, 1, n).unwrap();
                prop_assert!((v - oracle(&t, &p, 1, n)).abs() < 1e-9);
            }

            #[test]
            fn symmetric((t, p, n) in pairs()) {
                let a = qwk(&t, &p, 1, n).unwrap();
                let b = qwk(&p, &t, 1, n).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }

            #[test]
            fn shift_invariant((t, p, n) in pairs(), shift in 0u8..3) {
                let a = qwk(&t, &p, 1, n).unwrap();
                let ts: Vec<u8> = t.iter().map(|s| s + shift).collect();
                let ps: Vec<u8> = p.iter().map(|s| s + shift).collect();
                let b = qwk(&ts, &ps, 1 + shift, n + shift).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_labels_near_zero() {
        use rand::Rng;
        let mut inside = 0;
        for s in 0..100 {
            let mut rng = crate::seed::rng(s, &[]);
            let t: Vec<u8> = (0..10_000).map(|_| rng.random_range(1..=4)).collect();
            let p: Vec<u8> = (0..10_000).map(|_| rng.random_range(1..=4)).collect();
            if qwk(&t, &p, 1, 4).unwrap().abs() <= 0.05 {
                inside += 1;
            }
        }
        assert!(inside >= 95);
    }
}
