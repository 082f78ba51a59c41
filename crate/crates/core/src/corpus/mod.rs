//! Items, responses and everything needed to turn raw scored responses into
//! cross-validation splits.

mod folds;
mod io;
mod synth;
mod types;

pub use folds::{make_folds, FoldPlan, Rotation};
pub use io::{
    load_items, load_responses, read_items, read_responses, write_items, write_responses,
    ITEMS_SCHEMA, RESPONSES_SCHEMA, SCHEMA_VERSION,
};
pub use synth::{generate_synthetic, DemographicConfig, SynthConfig, SyntheticCorpus};
pub use types::{adjudicate, link_groups, validate_items, Item, Response, ResponseFormat};
