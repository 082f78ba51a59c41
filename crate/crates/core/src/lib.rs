//! In-context meta-trained automated scoring for reading-comprehension items.
//!
//! One shared scoring model is trained over the union of many items. Each model
//! input carries the target response, a frozen encoding of the reading passage,
//! the question, the item's valid score options and a handful of scored
//! in-context examples from the same item. Score classes outside an item's
//! range are masked before the softmax, so a single classification head serves
//! items with different score ranges.
//!
//! Modules:
//! - [`corpus`]: items, responses, adjudication, stratified folds, synthetic data
//! - [`textprep`]: tokenizer, spell checking, sentence splitting, passage encoding
//! - [`assembly`]: verbalizer, example sampling, input assembly
//! - [`model`]: reference transformer encoder, masked softmax, losses, checkpoints
//! - [`trainer`]: shared, per-item and multi-task training with early stopping
//! - [`metrics`]: QWK, rater agreement, paired t-tests, bias reports
//! - [`baselines`]: majority scorer, readability/length/syntax features, random forest
//! - [`harness`]: run configuration, manifests, commands and reports

#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod baselines;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod seed;
pub mod textprep;
pub mod trainer;

pub use error::{Error, Result};

/// Number of global score classes shared by every item (scores 1..=4).
pub const NUM_CLASSES: usize = 4;
