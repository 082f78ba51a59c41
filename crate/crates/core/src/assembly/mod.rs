//! Construction of the model input: verbalized scores, sampled in-context
//! examples and the fixed-budget token sequence.

mod input;
mod sampler;
mod template;
mod verbalizer;

pub use input::{
    assemble_input, AssembledInput, Assembler, InputAblation, ItemContext, SegmentRole, N_ROLES,
};
pub use sampler::{sample_examples, Example, ExampleSet, PoolEntry};
pub use template::TemplateConfig;
pub use verbalizer::{options_text, unverbalize, verbalize, VERBALIZER};
