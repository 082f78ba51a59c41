//! Acceptance criteria. Each test writes one `PASS` or `FAIL` line to stdout
//! (bypassing the harness capture) and then asserts its own verdict.

mod common;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::sync::OnceLock;
use std::time::Instant;

use icscore::assembly::{sample_examples, InputAblation, PoolEntry, TemplateConfig};
use icscore::baselines::{readability, WordList};
use icscore::corpus::{
    adjudicate, generate_synthetic, make_folds, write_items, write_responses, DemographicConfig,
    Item, Rotation, SynthConfig,
};
use icscore::harness::{cmd_crossval, read_predictions, RunConfig, FEATURES, MAJORITY};
use icscore::metrics::{
    bias_report, mean_qwk, paired_t_test, qwk, qwk_flagged, EvalRecord, Grouping,
};
use icscore::model::{item_loss, masked_softmax, LabeledInput, ScoringModel};
use icscore::trainer::{split, train_on_split, TrainConfig, Variant};
use icscore::{seed, NUM_CLASSES};
use rand::Rng;
use tempfile::TempDir;

fn report(id: u32, title: &str, pass: bool, detail: &str) -> bool {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "[{verdict}] criterion {id:>2}: {title}: {detail}").unwrap();
    out.flush().unwrap();
    pass
}

fn template() -> TemplateConfig {
    TemplateConfig {
        budget: 256,
        per_class_cap: 2,
        ..TemplateConfig::default()
    }
}

fn train_config(variant: Variant, ablation: InputAblation, seed: u64) -> TrainConfig {
    TrainConfig {
        variant,
        input_ablation: ablation,
        learning_rate: 1e-3,
        max_epochs: 6,
        early_stop_patience: 2,
        seed,
        ..TrainConfig::default()
    }
}

fn paper_corpus(seed: u64) -> SynthConfig {
    SynthConfig {
        n_items: 20,
        n_shared_pairs: 8,
        responses_per_item: 500,
        noise_rate: 0.05,
        seed,
        ..SynthConfig::default()
    }
}

/// Weighted kappa straight from its definition: observed and expected
/// confusion matrices with quadratic weights.
fn kappa_oracle(t: &[u8], p: &[u8], lo: u8, hi: u8) -> Option<f64> {
    let k = (hi - lo + 1) as usize;
    let n = t.len() as f64;
    let mut obs = vec![vec![0.0; k]; k];
    for (&a, &b) in t.iter().zip(p) {
        obs[(a - lo) as usize][(b - lo) as usize] += 1.0;
    }
    let rows: Vec<f64> = obs.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..k).map(|j| obs.iter().map(|r| r[j]).sum()).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let w = ((i as f64 - j as f64) / (k as f64 - 1.0)).powi(2);
            num += w * obs[i][j] / n;
            den += w * rows[i] * cols[j] / (n * n);
        }
    }
    (den > 0.0).then(|| 1.0 - num / den)
}

#[test]
fn criterion_01_qwk_oracle() {
    let start = Instant::now();
    let mut rng = seed::rng(1, &[]);
    let mut mismatches = 0;
    for _ in 0..200 {
        let levels = rng.random_range(2..=4u8);
        let n = rng.random_range(2..=50);
        let t: Vec<u8> = (0..n).map(|_| rng.random_range(1..=levels)).collect();
        let p: Vec<u8> = (0..n).map(|_| rng.random_range(1..=levels)).collect();
        let got = qwk_flagged(&t, &p, 1, levels).unwrap();
        let ok = match kappa_oracle(&t, &p, 1, levels) {
            Some(want) => (got.value - want).abs() <= 1e-9 && !got.degenerate,
            None => got.degenerate,
        };
        mismatches += usize::from(!ok);
    }
    let perfect = qwk(&[1, 3, 2, 4], &[1, 3, 2, 4], 1, 4).unwrap();
    let reversed = qwk(&[1, 2], &[2, 1], 1, 2).unwrap();
    let partial = qwk(&[1, 1, 2, 2], &[1, 2, 2, 2], 1, 2).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let pass =
        mismatches == 0 && perfect == 1.0 && reversed == -1.0 && partial == 2.0 / 3.0 && secs < 5.0;
    let detail = format!(
        "{}/200 oracle matches; perfect {perfect}; reversed {reversed}; [1,1,2,2] vs [1,2,2,2] gives {partial} \
         (expected 2/3; oracle gives {:.6}); {secs:.2}s",
        200 - mismatches,
        kappa_oracle(&[1, 1, 2, 2], &[1, 2, 2, 2], 1, 2).unwrap(),
    );
    assert!(
        report(1, "QWK oracle equivalence", pass, &detail),
        "{detail}"
    );
}

#[test]
fn criterion_02_masked_distribution() {
    let mut rng = seed::rng(2, &[]);
    let mut leaks = 0;
    let mut worst_sum: f64 = 0.0;
    for _ in 0..1000 {
        let logits: [f64; NUM_CLASSES] = std::array::from_fn(|_| rng.random_range(-50.0..50.0));
        let mut mask: [bool; NUM_CLASSES] = std::array::from_fn(|_| rng.random_bool(0.5));
        mask[rng.random_range(0..NUM_CLASSES)] = true;
        let d = masked_softmax(&logits, &mask).unwrap();
        leaks += (0..NUM_CLASSES)
            .filter(|&c| !mask[c] && d.probs[c] != 0.0)
            .count();
        worst_sum = worst_sum.max((d.probs.iter().sum::<f64>() - 1.0).abs());
    }

    let tok = common::tokenizer();
    let data = common::batch(tok.clone(), 16);
    let mut model = ScoringModel::shared(&common::config(tok.vocab_size()), 16, 3).unwrap();
    let mut changed = 0;
    for trial in 0..20 {
        let mask: [bool; NUM_CLASSES] = std::array::from_fn(|c| c < 2 + trial % 3);
        let batch: Vec<LabeledInput> = data
            .iter()
            .map(|ex| {
                let mut ex = ex.clone();
                ex.input.valid_mask = mask;
                ex.label = 1 + (trial % 2) as u8;
                ex
            })
            .collect();
        let before = item_loss(&model, &batch).unwrap();
        let (w, b) = model.layout().heads[0];
        for c in (0..NUM_CLASSES).filter(|&c| !mask[c]) {
            for v in w.row_mut(&mut model.params, c) {
                *v += rng.random_range(-5.0..5.0);
            }
            b.row_mut(&mut model.params, 0)[c] += rng.random_range(-5.0..5.0);
        }
        let after = item_loss(&model, &batch).unwrap();
        changed += usize::from(before.to_bits() != after.to_bits());
    }
    let pass = leaks == 0 && worst_sum <= 1e-12 && changed == 0;
    let detail = format!(
        "{leaks} nonzero invalid probabilities; max |sum - 1| = {worst_sum:.1e}; \
         {changed}/20 losses changed by invalid-row perturbation"
    );
    assert!(
        report(2, "masked-distribution invariants", pass, &detail),
        "{detail}"
    );
}

#[test]
fn criterion_03_gradient_check() {
    let start = Instant::now();
    let tok = common::tokenizer();
    let data = common::batch(tok.clone(), 16);
    let mut model = ScoringModel::shared(&common::config(tok.vocab_size()), 16, 11).unwrap();
    let worst = common::max_relative_error(&mut model, &data, 3);
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 1e-4 && secs < 120.0;
    let detail = format!("max relative error {worst:.2e} over 50 parameters; {secs:.1}s");
    assert!(report(3, "gradient check", pass, &detail), "{detail}");
}

#[test]
fn criterion_04_end_to_end_replication() {
    let start = Instant::now();
    let dir = TempDir::new().unwrap();
    let corpus = generate_synthetic(&paper_corpus(0)).unwrap();
    let items = dir.path().join("items.jsonl");
    let responses = dir.path().join("responses.jsonl");
    write_items(&items, &corpus.items).unwrap();
    write_responses(&responses, &corpus.responses).unwrap();
    let cfg = RunConfig {
        items: Some(items),
        responses: Some(responses),
        template: template(),
        train: train_config(Variant::SharedInContext, InputAblation::FullInContext, 0),
        ..RunConfig::default()
    };
    let rep = cmd_crossval(&cfg, &dir.path().join("run"), 1).unwrap();
    let shared = rep.approaches["shared_in_context+full_in_context"].mean_qwk;
    let majority = rep.approaches[MAJORITY].mean_qwk;
    let features = rep.approaches[FEATURES].mean_qwk;
    let mins = start.elapsed().as_secs_f64() / 60.0;
    let pass = shared >= 0.80
        && (-0.05..=0.05).contains(&majority)
        && majority < features
        && features < shared
        && mins <= 30.0;
    let detail = format!(
        "shared in-context {shared:.4} (>= 0.80), majority {majority:.4} (within 0.05 of 0), \
         feature forest {features:.4} (strictly between); {mins:.1} min"
    );
    assert!(
        report(4, "end-to-end synthetic replication", pass, &detail),
        "{detail}"
    );
}

/// Per-item test QWK of the three variants on rotation 0 of one seed.
struct SeedRun {
    items: Vec<Item>,
    shared: BTreeMap<String, f64>,
    multi: BTreeMap<String, f64>,
    per_item: BTreeMap<String, f64>,
}

fn seed_run(s: u64) -> SeedRun {
    let corpus = generate_synthetic(&paper_corpus(s)).unwrap();
    let folds = make_folds(&corpus.responses, &corpus.items, 5, s).unwrap();
    let sp = split(&corpus.responses, &folds, Rotation::new(0, 5)).unwrap();
    let evaluate = |variant, ablation| {
        let cfg = train_config(variant, ablation, s);
        let scorer = train_on_split(&corpus.items, &sp, &template(), &cfg).unwrap();
        let scored = scorer.predict(&sp.test, cfg.resamples, false).unwrap();
        let mut by_item: BTreeMap<String, (Vec<u8>, Vec<u8>)> = BTreeMap::new();
        for (r, p) in sp.test.iter().zip(&scored) {
            let e = by_item.entry(r.item_id.clone()).or_default();
            e.0.push(adjudicate(r));
            e.1.push(p.prediction.score());
        }
        corpus
            .items
            .iter()
            .map(|i| {
                let (t, p) = &by_item[&i.item_id];
                (
                    i.item_id.clone(),
                    qwk(t, p, i.min_score, i.max_score).unwrap(),
                )
            })
            .collect::<BTreeMap<_, _>>()
    };
    SeedRun {
        shared: evaluate(Variant::SharedInContext, InputAblation::FullInContext),
        multi: evaluate(Variant::MultiTask, InputAblation::ResponsePassageQuestion),
        per_item: evaluate(Variant::PerItem, InputAblation::ResponseOnly),
        items: corpus.items,
    }
}

fn seed_runs() -> &'static [SeedRun] {
    static RUNS: OnceLock<Vec<SeedRun>> = OnceLock::new();
    RUNS.get_or_init(|| (0..5).map(seed_run).collect())
}

#[test]
fn criterion_05_shared_item_trend() {
    let runs = seed_runs();
    let (mut shared, mut per_item) = (Vec::new(), Vec::new());
    for run in runs {
        let is_shared = |id: &str| run.items.iter().any(|i| i.item_id == id && i.is_shared());
        shared.push(mean_qwk(&run.shared, is_shared).unwrap());
        per_item.push(mean_qwk(&run.per_item, is_shared).unwrap());
    }
    let (a, b) = (mean(&shared), mean(&per_item));
    let detail = format!(
        "shared-item QWK over 5 seeds: shared in-context {a:.4}, per-item {b:.4}, difference {:+.4}",
        a - b
    );
    assert!(
        report(5, "shared-item gain over per-item models", a > b, &detail),
        "{detail}"
    );
}

#[test]
fn criterion_06_ablation_ordering() {
    let runs = seed_runs();
    let overall = |f: fn(&SeedRun) -> &BTreeMap<String, f64>| -> Vec<f64> {
        runs.iter()
            .map(|r| mean_qwk(f(r), |_| true).unwrap())
            .collect()
    };
    let shared = overall(|r| &r.shared);
    let multi = overall(|r| &r.multi);
    let per_item = overall(|r| &r.per_item);
    let mut lines = Vec::new();
    for (name, x, y) in [
        ("shared vs multi-task", &shared, &multi),
        ("multi-task vs per-item", &multi, &per_item),
        ("shared vs per-item", &shared, &per_item),
    ] {
        let t = paired_t_test(x, y).unwrap();
        lines.push(format!("{name}: t = {:.3}, p = {:.4}", t.t, t.p));
    }
    let (s, m, p) = (mean(&shared), mean(&multi), mean(&per_item));
    let detail = format!(
        "mean QWK over 5 seeds: shared {s:.4}, multi-task {m:.4}, per-item response-only {p:.4}; {}",
        lines.join("; ")
    );
    assert!(
        report(6, "ablation ordering", s >= m && m >= p, &detail),
        "{detail}"
    );
}

#[test]
fn criterion_07_readability() {
    let easy = WordList::easy_words();
    let ari = readability("Hello world.", &easy).ari;
    let flesch = readability("The cat sat.", &easy).flesch;
    let smog = readability("The cat sat.", &easy).smog;
    let pass = (ari - 3.12).abs() <= 1e-9
        && (flesch - 119.19).abs() <= 1e-9
        && (smog - 3.1291).abs() <= 1e-9;
    let detail = format!("ARI {ari:.12}, Flesch {flesch:.12}, SMOG {smog:.12}");
    assert!(
        report(7, "readability exactness", pass, &detail),
        "{detail}"
    );
}

#[test]
fn criterion_08_bias_identity_and_planted_noise() {
    let mut rng = seed::rng(8, &[]);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..200);
        let groups = rng.random_range(1..8);
        let records: Vec<EvalRecord> = (0..n)
            .map(|i| EvalRecord {
                response_id: format!("r{i}"),
                item_id: "x".into(),
                predicted: rng.random_range(1..=4),
                truth: rng.random_range(1..=4),
                gender: Some(format!("g{}", rng.random_range(0..groups))),
                ethnicity: None,
            })
            .collect();
        let r = bias_report(&records, Grouping::Gender);
        let weighted: f64 = r
            .groups
            .iter()
            .map(|g| g.count as f64 * g.bias)
            .sum::<f64>()
            / n as f64;
        worst = worst.max((weighted - r.overall_bias).abs());
    }

    let mut wins = 0;
    for s in 0..5 {
        let cfg = SynthConfig {
            n_items: 10,
            n_shared_pairs: 0,
            responses_per_item: 400,
            seed: s,
            demographics: DemographicConfig {
                group_noise: [("Female".to_string(), 0.4)].into(),
                ..DemographicConfig::default()
            },
            ..SynthConfig::default()
        };
        let c = generate_synthetic(&cfg).unwrap();
        let records: Vec<EvalRecord> = c
            .responses
            .iter()
            .map(|r| EvalRecord {
                response_id: r.response_id.clone(),
                item_id: r.item_id.clone(),
                predicted: c.planted[&r.response_id],
                truth: adjudicate(r),
                gender: r.gender.clone(),
                ethnicity: r.ethnicity.clone(),
            })
            .collect();
        let rep = bias_report(&records, Grouping::Gender);
        let abs = |g: &str| rep.group(g).map_or(0.0, |g| g.bias.abs());
        wins += usize::from(abs("Female") > abs("Male"));
    }
    let pass = worst <= 1e-12 && wins >= 4;
    let detail = format!("max identity gap {worst:.1e} over 100 partitions; noisier group larger |bias| in {wins}/5 seeds");
    assert!(
        report(8, "bias-report identity and planted noise", pass, &detail),
        "{detail}"
    );
}

#[test]
fn criterion_09_crossval_determinism() {
    let dir = TempDir::new().unwrap();
    let corpus = generate_synthetic(&SynthConfig {
        n_items: 4,
        n_shared_pairs: 1,
        responses_per_item: 40,
        vocab_size: 300,
        ..SynthConfig::default()
    })
    .unwrap();
    let items = dir.path().join("items.jsonl");
    let responses = dir.path().join("responses.jsonl");
    write_items(&items, &corpus.items).unwrap();
    write_responses(&responses, &corpus.responses).unwrap();
    let mut cfg = RunConfig {
        items: Some(items),
        responses: Some(responses),
        template: template(),
        baseline_grid: true,
        train: train_config(Variant::SharedInContext, InputAblation::FullInContext, 9),
        ..RunConfig::default()
    };
    cfg.train.max_epochs = 2;
    cfg.train.encoder.d_model = 16;
    cfg.train.encoder.d_ff = 32;
    let table = |name: &str| {
        let out = dir.path().join(name);
        cmd_crossval(&cfg, &out, 1).unwrap();
        std::fs::read(out.join("reports/predictions.csv")).unwrap()
    };
    let (a, b) = (table("a"), table("b"));
    let rows = read_predictions(&dir.path().join("a/reports/predictions.csv"))
        .unwrap()
        .len();
    let detail = format!("{} bytes, {rows} rows, identical: {}", a.len(), a == b);
    assert!(
        report(9, "crossval determinism", a == b && rows > 0, &detail),
        "{detail}"
    );
}

#[test]
fn criterion_10_sampler_properties() {
    let truncation = 70;
    let mut failures = Vec::new();
    for s in 0..1000u64 {
        let mut rng = seed::rng(10, &[s]);
        let max = rng.random_range(2..=4u8);
        let item = Item {
            max_score: max,
            ..common::item("it", max)
        };
        let cap = rng.random_range(1..=5);
        let pool: Vec<PoolEntry> = (0..rng.random_range(1..40))
            .map(|i| PoolEntry {
                text: format!("response {i}"),
                tokens: (0..rng.random_range(1..150)).collect(),
                score: rng.random_range(1..=max),
            })
            .collect();
        let exclude = format!("response {}", rng.random_range(0..pool.len()));
        let Ok(set) = sample_examples(&item, &pool, cap, s, &exclude, truncation) else {
            if pool.iter().any(|e| e.text != exclude) {
                failures.push(format!("seed {s}: sampling failed with a usable pool"));
            }
            continue;
        };
        for class in 1..=max {
            let available = pool
                .iter()
                .filter(|e| e.score == class && e.text != exclude)
                .count();
            let taken = set.examples.iter().filter(|e| e.score == class).count();
            if available > 0 && taken == 0 {
                failures.push(format!("seed {s}: class {class} missing"));
            }
            if taken > cap {
                failures.push(format!("seed {s}: class {class} has {taken} > cap {cap}"));
            }
        }
        if set.examples.iter().any(|e| e.tokens.len() > truncation) {
            failures.push(format!("seed {s}: example longer than {truncation} tokens"));
        }
        if set.examples.iter().any(|e| e.text == exclude) {
            failures.push(format!("seed {s}: excluded target sampled"));
        }
    }
    let detail = format!(
        "{} violations over 1000 seeds {:?}",
        failures.len(),
        failures.first()
    );
    assert!(
        report(10, "sampler properties", failures.is_empty(), &detail),
        "{detail}"
    );
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}
