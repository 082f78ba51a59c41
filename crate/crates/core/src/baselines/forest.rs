//! Random forest over dense feature rows: bootstrap-sampled, depth-limited
//! CART trees with Gini splits on a random subset of √F features per node.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features tried per split; `None` means the rounded square root.
    pub max_features: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 12,
            min_samples_split: 2,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Training-sample counts per class offset from `min_score`.
    Leaf { histogram: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_trees: usize,
    pub min_score: u8,
    pub max_score: u8,
    pub trees: Vec<Tree>,
    /// Training labels held one class only; every prediction is that class.
    pub constant: Option<u8>,
}

fn argmax_low(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    cfg: &'a ForestConfig,
    n_try: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn histogram(&self, rows: &[usize]) -> Vec<usize> {
        let mut h = vec![0; self.n_classes];
        for &r in rows {
            h[self.y[r]] += 1;
        }
        h
    }

    fn best_split(&self, rows: &[usize], rng: &mut seed::Rng) -> Option<(usize, f64, f64)> {
        let n_features = self.x[0].len();
        let parent = self.histogram(rows);
        let parent_gini = gini(&parent, rows.len());
        let mut best: Option<(usize, f64, f64)> = None;
        let mut features = index::sample(rng, n_features, self.n_try.min(n_features)).into_vec();
        features.sort_unstable();
        for f in features {
            let mut sorted: Vec<usize> = rows.to_vec();
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left = vec![0usize; self.n_classes];
            let mut right = parent.clone();
            for k in 0..sorted.len() - 1 {
                let c = self.y[sorted[k]];
                left[c] += 1;
                right[c] -= 1;
                let (a, b) = (self.x[sorted[k]][f], self.x[sorted[k + 1]][f]);
                if a == b {
                    continue;
                }
                let nl = k + 1;
                let nr = sorted.len() - nl;
                let impurity = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr))
                    / sorted.len() as f64;
                let gain = parent_gini - impurity;
                if gain > 1e-12 && best.is_none_or(|(_, _, g)| gain > g) {
                    best = Some((f, a + (b - a) / 2.0, gain));
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut seed::Rng) -> usize {
        let hist = self.histogram(&rows);
        let pure = hist.iter().filter(|&&c| c > 0).count() <= 1;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            histogram: hist.clone(),
        });
        if pure || depth >= self.cfg.max_depth || rows.len() < self.cfg.min_samples_split.max(2) {
            return id;
        }
        let Some((feature, threshold, _)) = self.best_split(&rows, rng) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

impl Tree {
    fn leaf(&self, row: &[f64]) -> &[usize] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Leaf { histogram } => return histogram,
            }
        }
    }

    /// Class index voted by this tree.
    pub fn vote(&self, row: &[f64]) -> usize {
        argmax_low(self.leaf(row))
    }
}

pub fn forest_fit(
    x: &[Vec<f64>],
    labels: &[u8],
    min_score: u8,
    max_score: u8,
    cfg: &ForestConfig,
    seed_value: u64,
) -> Result<ForestModel> {
    if x.len() != labels.len() {
        return Err(Error::Validation(
            "forest: feature rows and labels differ in count".into(),
        ));
    }
    if x.is_empty() {
        return Err(Error::Validation("forest: no training rows".into()));
    }
    if cfg.n_trees == 0 {
        return Err(Error::Config("forest: n_trees must be at least 1".into()));
    }
    let width = x[0].len();
    if width == 0 || x.iter().any(|r| r.len() != width) {
        return Err(Error::Validation(
            "forest: ragged or empty feature rows".into(),
        ));
    }
    if let Some(bad) = labels.iter().find(|&&l| l < min_score || l > max_score) {
        return Err(Error::Validation(format!(
            "forest: label {bad} outside {min_score}..={max_score}"
        )));
    }
    let y: Vec<usize> = labels.iter().map(|&l| (l - min_score) as usize).collect();
    let n_classes = (max_score - min_score + 1) as usize;
    let mut base = ForestModel {
        n_trees: cfg.n_trees,
        min_score,
        max_score,
        trees: Vec::new(),
        constant: None,
    };
    if labels.iter().all(|&l| l == labels[0]) {
        log::warn!(
            "forest: single-class training set, predicting {} everywhere",
            labels[0]
        );
        base.constant = Some(labels[0]);
        return Ok(base);
    }
    let n_try = cfg
        .max_features
        .unwrap_or_else(|| (width as f64).sqrt().round() as usize)
        .clamp(1, width);
    for t in 0..cfg.n_trees {
        let tree_seed = seed::derive(seed_value, &[seed::label("tree"), t as u64]);
        let mut rng = seed::rng(tree_seed, &[]);
        let rows: Vec<usize> = (0..x.len()).map(|_| rng.random_range(0..x.len())).collect();
        let mut b = Builder {
            x,
            y: &y,
            n_classes,
            cfg,
            n_try,
            nodes: Vec::new(),
        };
        b.grow(rows, 0, &mut rng);
        base.trees.push(Tree {
            nodes: b.nodes,
            seed: tree_seed,
        });
    }
    Ok(base)
}

/// Majority vote over trees; ties go to the lower score.
pub fn forest_predict(model: &ForestModel, row: &[f64]) -> u8 {
    if let Some(c) = model.constant {
        return c;
    }
    let mut votes = vec![0usize; (model.max_score - model.min_score + 1) as usize];
    for t in &model.trees {
        votes[t.vote(row)] += 1;
    }
    model.min_score + argmax_low(&votes) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Vec<Vec<f64>>, Vec<u8>) {
        let x: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![i as f64, ((i * 7) % 5) as f64, 1.0])
            .collect();
        let y = (0..40).map(|i| if i < 20 { 1 } else { 2 }).collect();
        (x, y)
    }

    fn accuracy(m: &ForestModel, x: &[Vec<f64>], y: &[u8]) -> f64 {
        x.iter()
            .zip(y)
            .filter(|(r, &l)| forest_predict(m, r) == l)
            .count() as f64
            / y.len() as f64
    }

    #[test]
    fn separable_is_fit() {
        let (x, y) = separable();
        let cfg = ForestConfig {
            n_trees: 15,
            max_depth: 3,
            ..ForestConfig::default()
        };
        let m = forest_fit(&x, &y, 1, 2, &cfg, 3).unwrap();
        assert_eq!(accuracy(&m, &x, &y), 1.0);
    }

    #[test]
    fn single_row() {
        let cfg = ForestConfig {
            n_trees: 1,
            ..ForestConfig::default()
        };
        let m = forest_fit(&[vec![1.0, 2.0]], &[3], 1, 4, &cfg, 0).unwrap();
        assert_eq!(forest_predict(&m, &[5.0, 5.0]), 3);
    }

    #[test]
    fn deterministic() {
        let (x, y) = separable();
        let cfg = ForestConfig::default();
        let a = forest_fit(&x, &y, 1, 2, &cfg, 9).unwrap();
        let b = forest_fit(&x, &y, 1, 2, &cfg, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn leaf_histograms_sum_to_samples() {
        let (x, y) = separable();
        let cfg = ForestConfig {
            n_trees: 5,
            max_depth: 2,
            ..ForestConfig::default()
        };
        let m = forest_fit(&x, &y, 1, 2, &cfg, 1).unwrap();
        for t in &m.trees {
            let total = |n: &Node| match n {
                Node::Leaf { histogram } => histogram.iter().sum::<usize>(),
                Node::Split { .. } => 0,
            };
            let leaves: usize = t.nodes.iter().map(total).sum();
            assert_eq!(leaves, x.len());
        }
    }

    #[test]
    fn depth_monotone_on_fixed_bootstrap() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i % 6) as f64, (i / 6) as f64])
            .collect();
        let y: Vec<u8> = (0..30)
            .map(|i| if (i % 6) < 3 && (i / 6) < 3 { 2 } else { 1 })
            .collect();
        let mut last = 0.0;
        for depth in 1..6 {
            let cfg = ForestConfig {
                n_trees: 1,
                max_depth: depth,
                max_features: Some(2),
                ..ForestConfig::default()
            };
            let acc = accuracy(&forest_fit(&x, &y, 1, 2, &cfg, 4).unwrap(), &x, &y);
            assert!(acc >= last, "depth {depth}: {acc} < {last}");
            last = acc;
        }
    }

    #[test]
    fn single_class_is_constant() {
        let m = forest_fit(
            &[vec![1.0], vec![2.0]],
            &[2, 2],
            1,
            3,
            &ForestConfig::default(),
            0,
        )
        .unwrap();
        assert_eq!(m.constant, Some(2));
        assert_eq!(forest_predict(&m, &[9.0]), 2);
    }
}
