use crate::corpus::Item;
use crate::{Error, Result};

/// Score words for scores 1..=4.
pub const VERBALIZER: [&str; 4] = ["poor", "fair", "good", "excellent"];

pub fn verbalize(score: u8) -> Result<&'static str> {
    VERBALIZER
        .get((score as usize).wrapping_sub(1))
        .copied()
        .ok_or_else(|| Error::Validation(format!("score {score} has no verbal form")))
}

pub fn unverbalize(word: &str) -> Result<u8> {
    VERBALIZER
        .iter()
        .position(|w| *w == word)
        .map(|i| i as u8 + 1)
        .ok_or_else(|| Error::Validation(format!("unknown score word {word:?}")))
}

/// The item's valid score words in ascending order, filled into `template`
/// at `{options}`.
pub fn options_text_with(item: &Item, template: &str) -> String {
    let words: Vec<&str> = item
        .scores()
        .map(|s| VERBALIZER[(s - 1) as usize])
        .collect();
    template.replace("{options}", &words.join(", "))
}

pub fn options_text(item: &Item) -> String {
    options_text_with(
        item,
        super::TemplateConfig::default().options_template.as_str(),
    )
}
