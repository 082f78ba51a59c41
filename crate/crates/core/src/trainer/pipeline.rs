use std::collections::BTreeMap;
use std::sync::Arc;

use crate::assembly::{
    sample_examples, AssembledInput, Assembler, InputAblation, ItemContext, PoolEntry,
    TemplateConfig, VERBALIZER,
};
use crate::corpus::{adjudicate, Item, Response};
use crate::model::{Encoder, FrozenSpec, TransformerEncoder};
use crate::textprep::{encode_passage, DictionaryChecker, SpellChecker, Tokenizer, WordTokenizer};
use crate::{seed, Error, Result};

use super::config::TrainConfig;

/// A response ready to be assembled: corrected text, tokens and label.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub response_id: String,
    pub item_id: String,
    pub text: String,
    pub tokens: Vec<u32>,
    pub label: u8,
    /// Demographic instruction, when conditioning applies to this response.
    pub prefix: Option<String>,
}

/// Text processing fitted on one training split: spelling dictionary,
/// vocabulary, frozen passage encodings, example pools and the assembler.
#[derive(Clone)]
pub struct Pipeline {
    pub items: BTreeMap<String, Item>,
    pub tokenizer: Arc<WordTokenizer>,
    pub assembler: Assembler,
    pub spell: Option<DictionaryChecker>,
    pub contexts: BTreeMap<String, ItemContext>,
    pub pools: BTreeMap<String, Vec<PoolEntry>>,
    pub frozen: FrozenSpec,
    pub ablation: InputAblation,
}

impl Pipeline {
    /// Fit on `train`; only these responses feed the dictionary, the
    /// vocabulary and the example pools.
    pub fn fit(
        items: &[Item],
        train: &[&Response],
        template: &TemplateConfig,
        cfg: &TrainConfig,
    ) -> Result<Self> {
        template.validate()?;
        let spell = cfg.spellcheck.then(|| {
            let texts = train.iter().map(|r| r.text.as_str()).chain(
                items
                    .iter()
                    .flat_map(|i| [i.passage_text.as_str(), i.question_text.as_str()]),
            );
            DictionaryChecker::from_corpus(texts, cfg.spell_min_count)
        });
        let corrected: Vec<String> = train
            .iter()
            .map(|r| correct(spell.as_ref(), &r.text))
            .collect();

        let mut fixed_text: Vec<String> = vec![
            template.target_instruction.clone(),
            template.passage_instruction.clone(),
            template.question_instruction.clone(),
            template
                .options_template
                .replace("{options}", &VERBALIZER.join(", ")),
            template.example_instruction.clone(),
            template.example_score_prefix.clone(),
        ];
        for r in train {
            if let (Some(g), Some(e)) = (&r.gender, &r.ethnicity) {
                fixed_text.push(template.demographic_prefix(g, e));
            }
        }
        for item in items {
            fixed_text.push(item.passage_text.clone());
            fixed_text.push(item.question_text.clone());
            if template.include_item_id {
                fixed_text.push(item.item_id.clone());
            }
        }
        let tokenizer = Arc::new(WordTokenizer::build(
            corrected
                .iter()
                .chain(fixed_text.iter())
                .map(String::as_str),
            1,
        ));

        let frozen_cfg = cfg.frozen_config(tokenizer.vocab_size());
        let frozen_seed = seed::derive(cfg.seed, &[seed::label("frozen")]);
        let encoder = TransformerEncoder::new(&frozen_cfg, frozen_seed)?;
        let frozen = FrozenSpec {
            config: frozen_cfg,
            seed: frozen_seed,
            mode: cfg.frozen.mode,
            digest: encoder.parameter_digest(),
        };

        let mut pools: BTreeMap<String, Vec<PoolEntry>> = items
            .iter()
            .map(|i| (i.item_id.clone(), Vec::new()))
            .collect();
        for (r, text) in train.iter().zip(&corrected) {
            let pool = pools.get_mut(&r.item_id).ok_or_else(|| {
                Error::Reference(format!(
                    "response {} names unknown item {}",
                    r.response_id, r.item_id
                ))
            })?;
            pool.push(PoolEntry {
                tokens: tokenizer.encode(text),
                text: text.clone(),
                score: adjudicate(r),
            });
        }
        Self::assemble_parts(
            items,
            tokenizer,
            template.clone(),
            spell,
            pools,
            frozen,
            &encoder,
            cfg.input_ablation,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble_parts(
        items: &[Item],
        tokenizer: Arc<WordTokenizer>,
        template: TemplateConfig,
        spell: Option<DictionaryChecker>,
        pools: BTreeMap<String, Vec<PoolEntry>>,
        frozen: FrozenSpec,
        encoder: &TransformerEncoder,
        ablation: InputAblation,
    ) -> Result<Self> {
        let assembler = Assembler::new(tokenizer.clone(), template);
        let mut contexts = BTreeMap::new();
        for item in items {
            let penc =
                encode_passage(&item.passage_text, frozen.mode, encoder, tokenizer.as_ref())?;
            contexts.insert(item.item_id.clone(), assembler.item_context(item, penc));
        }
        if encoder.parameter_digest() != frozen.digest {
            return Err(Error::Checkpoint(
                "frozen encoder parameters changed".into(),
            ));
        }
        Ok(Pipeline {
            items: items
                .iter()
                .map(|i| (i.item_id.clone(), i.clone()))
                .collect(),
            tokenizer,
            assembler,
            spell,
            contexts,
            pools,
            frozen,
            ablation,
        })
    }

    /// Rebuild from stored parts; the frozen encoder is regenerated from its
    /// seed and must match the stored digest.
    #[allow(clippy::too_many_arguments)]
    pub fn restore(
        items: &[Item],
        vocab: Vec<String>,
        template: TemplateConfig,
        spell: Option<DictionaryChecker>,
        pools: BTreeMap<String, Vec<PoolEntry>>,
        frozen: FrozenSpec,
        ablation: InputAblation,
    ) -> Result<Self> {
        let tokenizer = Arc::new(WordTokenizer::from_vocab(vocab)?);
        let encoder = TransformerEncoder::new(&frozen.config, frozen.seed)?;
        if encoder.parameter_digest() != frozen.digest {
            return Err(Error::Checkpoint("frozen encoder digest mismatch".into()));
        }
        Self::assemble_parts(
            items, tokenizer, template, spell, pools, frozen, &encoder, ablation,
        )
    }

    pub fn template(&self) -> &TemplateConfig {
        self.assembler.template()
    }

    pub fn item(&self, item_id: &str) -> Result<&Item> {
        self.items
            .get(item_id)
            .ok_or_else(|| Error::Reference(format!("unknown item {item_id}")))
    }

    /// Spell-correct, tokenize and label one response. The demographic prefix
    /// is attached only when `condition` is set and both attributes exist.
    pub fn target(&self, r: &Response, condition: bool) -> Result<Target> {
        self.item(&r.item_id)?;
        let text = correct(self.spell.as_ref(), &r.text);
        let prefix = match (condition, &r.gender, &r.ethnicity) {
            (true, Some(g), Some(e)) => Some(self.template().demographic_prefix(g, e)),
            _ => None,
        };
        Ok(Target {
            response_id: r.response_id.clone(),
            item_id: r.item_id.clone(),
            tokens: self.tokenizer.encode(&text),
            text,
            label: adjudicate(r),
            prefix,
        })
    }

    /// Assemble one input; in-context examples are drawn with
    /// `example_seed` from the item's training pool, never the target itself.
    pub fn input(&self, t: &Target, example_seed: u64) -> Result<AssembledInput> {
        let ctx = self
            .contexts
            .get(&t.item_id)
            .ok_or_else(|| Error::Reference(format!("unknown item {}", t.item_id)))?;
        let examples = if self.ablation.uses_examples() {
            let template = self.template();
            let pool = self.pools.get(&t.item_id).map(Vec::as_slice).unwrap_or(&[]);
            Some(sample_examples(
                &ctx.item,
                pool,
                template.per_class_cap,
                example_seed,
                &t.text,
                template.example_truncation,
            )?)
        } else {
            None
        };
        self.assembler.assemble(
            &t.tokens,
            ctx,
            examples.as_ref(),
            self.ablation,
            t.prefix.as_deref(),
        )
    }
}

fn correct(spell: Option<&DictionaryChecker>, text: &str) -> String {
    match spell {
        Some(s) => s.correct(text),
        None => text.to_string(),
    }
}
