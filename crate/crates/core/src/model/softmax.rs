use serde::{Deserialize, Serialize};

use crate::{Error, Result, NUM_CLASSES};

/// Probability vector over the global classes 1..=4 with invalid classes at
/// exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub probs: [f64; NUM_CLASSES],
    pub valid_mask: [bool; NUM_CLASSES],
}

impl ScoreDistribution {
    /// Most probable valid score; ties go to the lower score.
    pub fn predicted(&self) -> u8 {
        let mut best = None::<(usize, f64)>;
        for c in 0..NUM_CLASSES {
            if self.valid_mask[c] && best.is_none_or(|(_, p)| self.probs[c] > p) {
                best = Some((c, self.probs[c]));
            }
        }
        best.map(|(c, _)| c as u8 + 1)
            .expect("at least one valid class")
    }

    pub fn prob_of(&self, score: u8) -> f64 {
        self.probs[(score - 1) as usize]
    }

    /// Elementwise mean of distributions sharing one mask.
    pub fn mean(dists: &[ScoreDistribution]) -> Result<ScoreDistribution> {
        let first = dists
            .first()
            .ok_or_else(|| Error::Validation("cannot average zero distributions".into()))?;
        if dists.iter().any(|d| d.valid_mask != first.valid_mask) {
            return Err(Error::Validation(
                "averaged distributions differ in mask".into(),
            ));
        }
        let mut probs = [0.0; NUM_CLASSES];
        for d in dists {
            for (acc, p) in probs.iter_mut().zip(d.probs) {
                *acc += p;
            }
        }
        for p in probs.iter_mut() {
            *p /= dists.len() as f64;
        }
        Ok(ScoreDistribution {
            probs,
            valid_mask: first.valid_mask,
        })
    }
}

/// Softmax over the valid logits only; invalid classes get probability 0.
pub fn masked_softmax(
    logits: &[f64; NUM_CLASSES],
    mask: &[bool; NUM_CLASSES],
) -> Result<ScoreDistribution> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Validation("score mask has no valid class".into()));
    }
    let mut probs = [0.0; NUM_CLASSES];
    let mut sum = 0.0;
    for c in 0..NUM_CLASSES {
        if mask[c] {
            probs[c] = (logits[c] - max).exp();
            sum += probs[c];
        }
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    Ok(ScoreDistribution {
        probs,
        valid_mask: *mask,
    })
}
