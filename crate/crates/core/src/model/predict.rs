use super::scorer::ScoringModel;
use super::softmax::ScoreDistribution;
use crate::assembly::AssembledInput;
use crate::{Error, Result};

/// Mean distribution over resampled inputs for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePrediction {
    pub distribution: ScoreDistribution,
    pub members: Vec<ScoreDistribution>,
}

impl EnsemblePrediction {
    pub fn score(&self) -> u8 {
        self.distribution.predicted()
    }
}

/// Score each of the R inputs (same target, different example draws) and
/// average the distributions elementwise. Ties go to the lower score.
pub fn predict_ensemble(
    model: &ScoringModel,
    inputs: &[AssembledInput],
) -> Result<EnsemblePrediction> {
    if inputs.is_empty() {
        return Err(Error::Config("ensemble needs at least one resample".into()));
    }
    let members = inputs
        .iter()
        .map(|i| model.distribution(i))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsemblePrediction {
        distribution: ScoreDistribution::mean(&members)?,
        members,
    })
}
