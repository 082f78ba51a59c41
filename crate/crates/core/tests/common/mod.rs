//! Fixtures shared by the integration test targets.
#![allow(dead_code)]

use std::sync::Arc;

use icscore::assembly::{Assembler, Example, ExampleSet, InputAblation, TemplateConfig, N_ROLES};
use icscore::corpus::{Item, ResponseFormat};
use icscore::model::{EncoderConfig, LabeledInput, ScoringModel};
use icscore::textprep::{PassageEncoding, PassageMode, Tokenizer, WordTokenizer};
use rand::seq::index;
use rand::SeedableRng;

pub fn item(id: &str, max: u8) -> Item {
    Item {
        item_id: id.into(),
        grade: 8,
        passage_text: "A fox ran. It hid.".into(),
        question_text: "why did the fox hide ?".into(),
        rubric_text: None,
        min_score: 1,
        max_score: max,
        response_format: ResponseFormat::Extended,
        link_key: None,
    }
}

pub fn batch(tok: Arc<dyn Tokenizer>, passage_dim: usize) -> Vec<LabeledInput> {
    let asm = Assembler::new(tok.clone(), TemplateConfig::default());
    let mut out = Vec::new();
    for (n, (id, max, label)) in [("a", 3u8, 2u8), ("b", 4, 4), ("a", 3, 1)]
        .into_iter()
        .enumerate()
    {
        let passage = PassageEncoding {
            mode: PassageMode::PerSentence,
            vectors: (0..2)
                .map(|s| {
                    (0..passage_dim)
                        .map(|j| ((s * 7 + j + n) as f64 * 0.37).sin())
                        .collect()
                })
                .collect(),
        };
        let ctx = asm.item_context(&item(id, max), passage);
        let examples = ExampleSet {
            item_id: id.into(),
            examples: (1..=max)
                .map(|s| Example {
                    text: String::new(),
                    tokens: tok.encode("the fox was scared"),
                    score: s,
                })
                .collect(),
            seed: 0,
            missing_classes: vec![],
        };
        let target = tok.encode("it was afraid of the dog");
        let input = asm
            .assemble(
                &target,
                &ctx,
                Some(&examples),
                InputAblation::FullInContext,
                None,
            )
            .unwrap();
        out.push(LabeledInput { input, label });
    }
    out
}

/// Worst relative error between analytic and central-difference gradients
/// over 50 sampled parameters with non-negligible gradient.
pub fn max_relative_error(model: &mut ScoringModel, data: &[LabeledInput], seed: u64) -> f64 {
    let mut grads = vec![0.0; model.n_params()];
    model.loss_and_grad(data, &mut grads).unwrap();
    let loss = |m: &ScoringModel| m.loss_and_grad(data, &mut vec![0.0; m.n_params()]).unwrap();

    let candidates: Vec<usize> = (0..grads.len())
        .filter(|&i| grads[i].abs() > 1e-6)
        .collect();
    assert!(candidates.len() >= 50);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for k in index::sample(&mut rng, candidates.len(), 50) {
        let i = candidates[k];
        let orig = model.params[i];
        model.params[i] = orig + h;
        let up = loss(model);
        model.params[i] = orig - h;
        let down = loss(model);
        model.params[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let rel = (numeric - grads[i]).abs() / numeric.abs().max(grads[i].abs());
        worst = worst.max(rel);
    }
    worst
}

pub fn tokenizer() -> Arc<dyn Tokenizer> {
    Arc::new(WordTokenizer::build(
        [
            "score this response: passage: question: options: poor fair good excellent",
            "why did the fox hide ? it was afraid of the dog scared",
        ],
        1,
    ))
}

pub fn config(vocab: usize) -> EncoderConfig {
    EncoderConfig {
        vocab_size: vocab,
        d_model: 16,
        n_layers: 2,
        n_heads: 2,
        d_ff: 32,
        max_positions: 128,
        n_roles: N_ROLES,
    }
}
