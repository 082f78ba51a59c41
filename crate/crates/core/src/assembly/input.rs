use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::sampler::ExampleSet;
use super::template::TemplateConfig;
use super::verbalizer::{options_text_with, VERBALIZER};
use crate::corpus::Item;
use crate::model::Sequence;
use crate::textprep::{PassageEncoding, SpecialTokens, Tokenizer};
use crate::{Error, Result, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum SegmentRole {
    Cls = 0,
    Instruction = 1,
    Target = 2,
    Separator = 3,
    Passage = 4,
    Question = 5,
    Options = 6,
    Example = 7,
}

pub const N_ROLES: usize = 8;

/// Which input segments a model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputAblation {
    ResponseOnly,
    ResponsePassageQuestion,
    FullInContext,
}

impl InputAblation {
    pub fn name(self) -> &'static str {
        match self {
            InputAblation::ResponseOnly => "response_only",
            InputAblation::ResponsePassageQuestion => "response_passage_question",
            InputAblation::FullInContext => "full_in_context",
        }
    }

    pub fn uses_examples(self) -> bool {
        self == InputAblation::FullInContext
    }

    pub fn uses_passage(self) -> bool {
        self != InputAblation::ResponseOnly
    }
}

/// The model input for one target response.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledInput {
    pub token_ids: Vec<u32>,
    pub segment_roles: Vec<SegmentRole>,
    /// Positions that carry passage vectors instead of token embeddings.
    pub pseudo_token_slots: Vec<usize>,
    pub passage_vectors: Vec<Vec<f64>>,
    pub item_id: String,
    pub valid_mask: [bool; NUM_CLASSES],
    pub examples_kept: usize,
    pub examples_dropped: usize,
    pub target_truncated: bool,
    pub demographic_prefix: bool,
}

impl AssembledInput {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn role_ids(&self) -> Vec<u8> {
        self.segment_roles.iter().map(|&r| r as u8).collect()
    }

    pub fn sequence<'a>(&'a self, roles: &'a [u8]) -> Sequence<'a> {
        Sequence {
            tokens: &self.token_ids,
            roles,
            slot_positions: &self.pseudo_token_slots,
            slot_vectors: &self.passage_vectors,
        }
    }

    pub fn positions_with(&self, role: SegmentRole) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.segment_roles[i] == role)
            .collect()
    }

    pub fn tokens_with(&self, role: SegmentRole) -> Vec<u32> {
        self.positions_with(role)
            .into_iter()
            .map(|i| self.token_ids[i])
            .collect()
    }
}

/// Per-item pieces reused across every input for that item.
#[derive(Debug, Clone)]
pub struct ItemContext {
    pub item: Item,
    pub passage: PassageEncoding,
    question: Vec<u32>,
    options: Vec<u32>,
    item_id_tokens: Vec<u32>,
}

/// Builds inputs for a fixed tokenizer and template.
#[derive(Clone)]
pub struct Assembler {
    tokenizer: Arc<dyn Tokenizer>,
    template: TemplateConfig,
    sp: SpecialTokens,
    target_instr: Vec<u32>,
    passage_instr: Vec<u32>,
    question_instr: Vec<u32>,
    example_instr: Vec<u32>,
    score_prefix: Vec<u32>,
    verbal: [Vec<u32>; NUM_CLASSES],
}

struct Builder {
    tokens: Vec<u32>,
    roles: Vec<SegmentRole>,
}

impl Builder {
    fn push(&mut self, toks: &[u32], role: SegmentRole) {
        self.tokens.extend_from_slice(toks);
        self.roles.extend(std::iter::repeat_n(role, toks.len()));
    }
}

impl Assembler {
    pub fn new(tokenizer: Arc<dyn Tokenizer>, template: TemplateConfig) -> Self {
        let enc = |s: &str| tokenizer.encode(s);
        Assembler {
            sp: tokenizer.special(),
            target_instr: enc(&template.target_instruction),
            passage_instr: enc(&template.passage_instruction),
            question_instr: enc(&template.question_instruction),
            example_instr: enc(&template.example_instruction),
            score_prefix: enc(&template.example_score_prefix),
            verbal: VERBALIZER.map(enc),
            template,
            tokenizer,
        }
    }

    pub fn template(&self) -> &TemplateConfig {
        &self.template
    }

    pub fn tokenizer(&self) -> &dyn Tokenizer {
        self.tokenizer.as_ref()
    }

    pub fn item_context(&self, item: &Item, passage: PassageEncoding) -> ItemContext {
        ItemContext {
            item: item.clone(),
            passage,
            question: self.tokenizer.encode(&item.question_text),
            options: self
                .tokenizer
                .encode(&options_text_with(item, &self.template.options_template)),
            item_id_tokens: self.tokenizer.encode(&item.item_id),
        }
    }

    /// Token cost of one example including its trailing separator.
    pub fn example_cost(&self, example_tokens: usize, score: u8) -> usize {
        self.example_instr.len()
            + example_tokens
            + self.score_prefix.len()
            + self.verbal[(score - 1) as usize].len()
            + 1
    }

    /// Assemble `[CLS] prefix instr target [SEP] passage [SEP] question [SEP]
    /// options [SEP] (example [SEP])*`, dropping passage and question for the
    /// response-only ablation and examples unless in-context. Over-budget
    /// inputs lose whole examples from the end, skipping an example that is
    /// the last representative of its class while another drop exists.
    pub fn assemble(
        &self,
        target_tokens: &[u32],
        ctx: &ItemContext,
        examples: Option<&ExampleSet>,
        ablation: InputAblation,
        prefix: Option<&str>,
    ) -> Result<AssembledInput> {
        use SegmentRole::*;
        let budget = self.template.budget;
        let prefix_tokens = prefix.map(|p| self.tokenizer.encode(p)).unwrap_or_default();
        let n_slots = if ablation.uses_passage() {
            ctx.passage.vectors.len()
        } else {
            0
        };

        let mut fixed =
            1 + prefix_tokens.len() + self.target_instr.len() + 1 + ctx.options.len() + 1;
        if self.template.include_item_id {
            fixed += ctx.item_id_tokens.len();
        }
        if ablation.uses_passage() {
            fixed += self.passage_instr.len()
                + n_slots
                + 1
                + self.question_instr.len()
                + ctx.question.len()
                + 1;
        }
        if fixed + 1 > budget {
            return Err(Error::Budget {
                needed: fixed + 1,
                budget,
                overflow: fixed + 1 - budget,
            });
        }
        let target_room = budget - fixed;
        let target_len = target_tokens.len().max(1).min(target_room);
        let target_truncated = target_tokens.len() > target_len;

        let all_examples: &[super::sampler::Example] = match (ablation.uses_examples(), examples) {
            (true, Some(set)) => &set.examples,
            _ => &[],
        };
        let costs: Vec<usize> = all_examples
            .iter()
            .map(|e| self.example_cost(e.tokens.len(), e.score))
            .collect();
        let room = budget - fixed - target_len;
        let mut kept: Vec<usize> = (0..all_examples.len()).collect();
        let mut total: usize = costs.iter().sum();
        while total > room {
            let mut per_class = [0usize; NUM_CLASSES];
            for &i in &kept {
                per_class[(all_examples[i].score - 1) as usize] += 1;
            }
            let pos = kept
                .iter()
                .rposition(|&i| per_class[(all_examples[i].score - 1) as usize] > 1)
                .unwrap_or(kept.len() - 1);
            total -= costs[kept.remove(pos)];
        }

        let mut b = Builder {
            tokens: Vec::with_capacity(budget),
            roles: Vec::with_capacity(budget),
        };
        b.push(&[self.sp.cls], Cls);
        b.push(&prefix_tokens, Instruction);
        if self.template.include_item_id {
            b.push(&ctx.item_id_tokens, Instruction);
        }
        b.push(&self.target_instr, Instruction);
        if target_tokens.is_empty() {
            b.push(&[self.sp.pad], Target);
        } else {
            b.push(&target_tokens[..target_len], Target);
        }
        b.push(&[self.sp.sep], Separator);
        let mut slots = Vec::new();
        let mut vectors = Vec::new();
        if ablation.uses_passage() {
            b.push(&self.passage_instr, Instruction);
            for v in &ctx.passage.vectors {
                slots.push(b.tokens.len());
                vectors.push(v.clone());
                b.push(&[self.sp.pad], Passage);
            }
            b.push(&[self.sp.sep], Separator);
            b.push(&self.question_instr, Instruction);
            b.push(&ctx.question, Question);
            b.push(&[self.sp.sep], Separator);
        }
        b.push(&ctx.options, Options);
        b.push(&[self.sp.sep], Separator);
        for &i in &kept {
            let e = &all_examples[i];
            b.push(&self.example_instr, Example);
            b.push(&e.tokens, Example);
            b.push(&self.score_prefix, Example);
            b.push(&self.verbal[(e.score - 1) as usize], Example);
            b.push(&[self.sp.sep], Separator);
        }
        debug_assert!(b.tokens.len() <= budget);

        Ok(AssembledInput {
            token_ids: b.tokens,
            segment_roles: b.roles,
            pseudo_token_slots: slots,
            passage_vectors: vectors,
            item_id: ctx.item.item_id.clone(),
            valid_mask: ctx.item.valid_mask(),
            examples_kept: kept.len(),
            examples_dropped: all_examples.len() - kept.len(),
            target_truncated,
            demographic_prefix: prefix.is_some(),
        })
    }
}

/// One-shot assembly with the default template at the given budget.
pub fn assemble_input(
    target: &str,
    item: &Item,
    examples: &ExampleSet,
    passage: &PassageEncoding,
    tokenizer: Arc<dyn Tokenizer>,
    budget: usize,
) -> Result<AssembledInput> {
    let template = TemplateConfig {
        budget,
        ..TemplateConfig::default()
    };
    let asm = Assembler::new(tokenizer, template);
    let ctx = asm.item_context(item, passage.clone());
    let target_tokens = asm.tokenizer().encode(target);
    asm.assemble(
        &target_tokens,
        &ctx,
        Some(examples),
        InputAblation::FullInContext,
        None,
    )
}
