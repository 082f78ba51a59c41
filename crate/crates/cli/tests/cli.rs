use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn icscore(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icscore"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

const SYNTH: &str = "n_items = 4\nn_shared_pairs = 1\nresponses_per_item = 24\nvocab_size = 300\n";

const RUN: &str = r#"
items = "corpus/items.jsonl"
responses = "corpus/responses.jsonl"
folds = 3
classical_baselines = false

[template]
budget = 128
per_class_cap = 1

[train]
max_epochs = 1
resamples = 1

[train.encoder]
d_model = 16
n_layers = 1
n_heads = 2
d_ff = 32
max_positions = 128
"#;

fn setup() -> TempDir {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("synth.toml"), SYNTH).unwrap();
    std::fs::write(dir.path().join("run.toml"), RUN).unwrap();
    let out = icscore(
        dir.path(),
        &["synth", "--config", "synth.toml", "--out", "corpus"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    dir
}

#[test]
fn full_command_cycle_succeeds() {
    let dir = setup();
    let d = dir.path();
    let cv = icscore(
        d,
        &[
            "crossval",
            "--config",
            "run.toml",
            "--out",
            "cv",
            "--threads",
            "2",
            "--spellcheck",
            "off",
        ],
    );
    assert!(
        cv.status.success(),
        "{}",
        String::from_utf8_lossy(&cv.stderr)
    );
    assert!(String::from_utf8_lossy(&cv.stdout).contains("shared_in_context+full_in_context"));
    assert!(d.join("cv/reports/report.json").exists());

    let tr = icscore(
        d,
        &[
            "train",
            "--config",
            "run.toml",
            "--out",
            "run",
            "--variant",
            "multi-task",
            "--ablation",
            "response-passage-question",
        ],
    );
    assert!(
        tr.status.success(),
        "{}",
        String::from_utf8_lossy(&tr.stderr)
    );
    let sc = icscore(
        d,
        &[
            "score",
            "--checkpoint",
            "run/checkpoints/model.json",
            "--responses",
            "corpus/responses.jsonl",
            "--out",
            "scores.csv",
            "--resamples",
            "2",
            "--condition-demographics",
        ],
    );
    assert!(
        sc.status.success(),
        "{}",
        String::from_utf8_lossy(&sc.stderr)
    );
    let table = std::fs::read_to_string(d.join("scores.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 4 * 24);
    assert!(table
        .lines()
        .nth(1)
        .unwrap()
        .contains("multi_task+response_passage_question"));

    let au = icscore(
        d,
        &[
            "audit",
            "--predictions",
            "scores.csv",
            "--items",
            "corpus/items.jsonl",
            "--responses",
            "corpus/responses.jsonl",
            "--grouping",
            "gender",
            "--out",
            "audit.json",
        ],
    );
    assert!(
        au.status.success(),
        "{}",
        String::from_utf8_lossy(&au.stderr)
    );
    assert!(d.join("audit.json").exists());
}

#[test]
fn validation_errors_exit_nonzero() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(d.join("bad.toml"), "n_items = 0\n").unwrap();
    let bad = icscore(d, &["synth", "--config", "bad.toml", "--out", "x"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("n_items"));

    std::fs::write(d.join("typo.toml"), "fodls = 3\n").unwrap();
    assert!(
        !icscore(d, &["crossval", "--config", "typo.toml", "--out", "x"])
            .status
            .success()
    );

    let missing = icscore(
        d,
        &[
            "score",
            "--checkpoint",
            "nope.json",
            "--responses",
            "corpus/responses.jsonl",
            "--out",
            "s.csv",
        ],
    );
    assert!(!missing.status.success());

    assert!(!icscore(
        d,
        &[
            "crossval",
            "--config",
            "run.toml",
            "--out",
            "x",
            "--spellcheck",
            "maybe"
        ]
    )
    .status
    .success());
}
