use super::scorer::ScoringModel;
use super::softmax::ScoreDistribution;
use crate::assembly::AssembledInput;
use crate::{Error, Result};

/// An assembled input with its adjudicated target score.
#[derive(Debug, Clone)]
pub struct LabeledInput {
    pub input: AssembledInput,
    pub label: u8,
}

/// `-ln p(label)`; a label on a masked class is a data/model mismatch.
pub fn nll(dist: &ScoreDistribution, label: u8) -> Result<f64> {
    if !(1..=crate::NUM_CLASSES as u8).contains(&label) || !dist.valid_mask[(label - 1) as usize] {
        return Err(Error::Validation(format!(
            "label {label} is masked out for this input"
        )));
    }
    Ok(-dist.prob_of(label).ln())
}

/// Summed negative log-likelihood over one item's batch.
pub fn item_loss(model: &ScoringModel, batch: &[LabeledInput]) -> Result<f64> {
    let mut total = 0.0;
    for ex in batch {
        total += nll(&model.distribution(&ex.input)?, ex.label)?;
    }
    Ok(total)
}

/// Sum of per-item losses.
pub fn total_loss(model: &ScoringModel, batches: &[Vec<LabeledInput>]) -> Result<f64> {
    batches.iter().map(|b| item_loss(model, b)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dist(probs: [f64; 4], mask: [bool; 4]) -> ScoreDistribution {
        ScoreDistribution {
            probs,
            valid_mask: mask,
        }
    }

    #[test]
    fn closed_forms() {
        let m3 = [true, true, true, false];
        assert_eq!(nll(&dist([0.0, 1.0, 0.0, 0.0], m3), 2).unwrap(), 0.0);
        let u = dist([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0], m3);
        assert_abs_diff_eq!(nll(&u, 1).unwrap(), 3f64.ln(), epsilon = 1e-12);
        let a = nll(&dist([0.5, 0.5, 0.0, 0.0], m3), 1).unwrap();
        let b = nll(&dist([0.25, 0.75, 0.0, 0.0], m3), 1).unwrap();
        assert_abs_diff_eq!(a + b, 2.0794415416798357, epsilon = 1e-12);
    }

    #[test]
    fn masked_label_is_error() {
        assert!(nll(&dist([0.5, 0.5, 0.0, 0.0], [true, true, false, false]), 3).is_err());
    }
}
