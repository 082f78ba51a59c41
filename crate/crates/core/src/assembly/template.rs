use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Instruction strings and size limits for input assembly. Loaded from TOML;
/// every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateConfig {
    pub target_instruction: String,
    pub passage_instruction: String,
    pub question_instruction: String,
    /// `{options}` is replaced by the comma-separated score words.
    pub options_template: String,
    pub example_instruction: String,
    pub example_score_prefix: String,
    /// `{gender}` and `{ethnicity}` are filled from the response.
    pub demographic_template: String,
    /// Prepend the item id as an instruction after `[CLS]`.
    pub include_item_id: bool,
    pub budget: usize,
    pub per_class_cap: usize,
    pub example_truncation: usize,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        TemplateConfig {
            target_instruction: "score this response:".into(),
            passage_instruction: "passage:".into(),
            question_instruction: "question:".into(),
            options_template: "options: {options}".into(),
            example_instruction: String::new(),
            example_score_prefix: "score:".into(),
            demographic_template: "score this answer written by a {gender} {ethnicity} student"
                .into(),
            include_item_id: false,
            budget: 512,
            per_class_cap: 25,
            example_truncation: 70,
        }
    }
}

impl TemplateConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: TemplateConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget < 2 || self.per_class_cap == 0 || self.example_truncation == 0 {
            return Err(Error::Config(
                "template: budget >= 2, per_class_cap >= 1 and example_truncation >= 1 required"
                    .into(),
            ));
        }
        if !self.options_template.contains("{options}") {
            return Err(Error::Config(
                "template: options_template lacks {options}".into(),
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("template serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn demographic_prefix(&self, gender: &str, ethnicity: &str) -> String {
        self.demographic_template
            .replace("{gender}", gender)
            .replace("{ethnicity}", ethnicity)
    }
}
