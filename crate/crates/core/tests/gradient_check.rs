//! Finite-difference check of the hand-written backward pass.

mod common;

use common::{batch, config, max_relative_error, tokenizer};
use icscore::model::ScoringModel;

#[test]
fn shared_head_gradients_match_finite_differences() {
    let tok = tokenizer();
    let data = batch(tok.clone(), 16);
    let mut model = ScoringModel::shared(&config(tok.vocab_size()), 16, 11).unwrap();
    let worst = max_relative_error(&mut model, &data, 1);
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn projected_passage_and_multi_head_gradients() {
    let tok = tokenizer();
    let data = batch(tok.clone(), 12);
    let mut model =
        ScoringModel::multi_head(&config(tok.vocab_size()), 12, &["a".into(), "b".into()], 5)
            .unwrap();
    let worst = max_relative_error(&mut model, &data, 2);
    assert!(worst < 1e-4, "max relative error {worst}");
}
