use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::assembly::TemplateConfig;
use crate::baselines::{feature_baseline, majority_baseline};
use crate::corpus::{
    adjudicate, generate_synthetic, link_groups, load_items, load_responses, make_folds,
    read_responses, validate_items, write_items, write_responses, FoldPlan, Item, Response,
    Rotation, SynthConfig,
};
use crate::metrics::{
    bias_report, mean_qwk, paired_t_test, qwk, rater_agreement, BiasReport, EvalRecord, Grouping,
};
use crate::model::Checkpoint;
use crate::trainer::{split, train_on_split, Split, TrainReport, TrainedScorer};
use crate::{seed, Error, Result};

use super::config::{Approach, Pairing, RunConfig, FEATURES, MAJORITY};
use super::manifest::{write_json, RunManifest};
use super::report::{
    read_predictions, write_predictions, ApproachResult, CrossvalReport, Failure, FoldResult,
    PredictionRow, TTestEntry,
};

/// Files written by `cmd_synth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub items_path: PathBuf,
    pub responses_path: PathBuf,
    pub n_items: usize,
    pub n_responses: usize,
    pub shared_pairs: usize,
}

pub fn cmd_synth(cfg: &SynthConfig, out: &Path) -> Result<SynthSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let corpus = generate_synthetic(cfg)?;
    let items_path = out.join("items.jsonl");
    let responses_path = out.join("responses.jsonl");
    write_items(&items_path, &corpus.items)?;
    write_responses(&responses_path, &corpus.responses)?;
    let config_hash = {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(serde_json::to_string(cfg)?.as_bytes()))
    };
    let mut manifest = RunManifest::begin(
        "synth",
        &config_hash,
        [("synth".to_string(), cfg.seed)].into(),
        &[&items_path, &responses_path],
    )?;
    manifest.finish(true);
    manifest.write(&out.join("manifest.json"))?;
    let items = load_items(&items_path)?;
    Ok(SynthSummary {
        n_items: items.len(),
        n_responses: load_responses(&responses_path, &items)?.len(),
        shared_pairs: link_groups(&items).len(),
        items_path,
        responses_path,
    })
}

fn load_corpus(cfg: &RunConfig) -> Result<(Vec<Item>, Vec<Response>)> {
    let (ip, rp) = cfg.corpus_paths()?;
    let items = load_items(ip)?;
    validate_items(&items)?;
    let responses = load_responses(rp, &items)?;
    Ok((items, responses))
}

/// Run `f(0..n)` on up to `threads` workers; results keep index order.
fn run_jobs<T: Send>(n: usize, threads: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    if threads <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..threads.min(n) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let r = f(i);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot").expect("job ran"))
        .collect()
}

fn scored_rows(
    scorer: &TrainedScorer,
    test: &[&Response],
    resamples: usize,
    condition: bool,
    run: &str,
    approach: &str,
    fold: Option<usize>,
) -> Result<Vec<PredictionRow>> {
    let scored = scorer.predict(test, resamples, condition)?;
    Ok(test
        .iter()
        .zip(scored)
        .map(|(r, s)| {
            let mut row = PredictionRow {
                run: run.to_string(),
                approach: approach.to_string(),
                fold,
                response_id: r.response_id.clone(),
                item_id: r.item_id.clone(),
                true_score: Some(adjudicate(r)),
                predicted: s.prediction.score(),
                p1: None,
                p2: None,
                p3: None,
                p4: None,
                resamples: Some(resamples),
                conditioned: s.conditioned,
                conditioning_fallback: condition && !s.conditioned,
            };
            row.set_probs(&s.prediction.distribution.probs);
            row
        })
        .collect())
}

fn label_rows(
    run: &str,
    approach: &str,
    fold: usize,
    test: &[&Response],
    preds: &BTreeMap<String, u8>,
) -> Vec<PredictionRow> {
    test.iter()
        .map(|r| PredictionRow {
            run: run.to_string(),
            approach: approach.to_string(),
            fold: Some(fold),
            response_id: r.response_id.clone(),
            item_id: r.item_id.clone(),
            true_score: Some(adjudicate(r)),
            predicted: preds[&r.response_id],
            p1: None,
            p2: None,
            p3: None,
            p4: None,
            resamples: None,
            conditioned: false,
            conditioning_fallback: false,
        })
        .collect()
}

fn kappa_by_item(
    rows: &[&PredictionRow],
    items: &BTreeMap<&str, &Item>,
) -> Result<BTreeMap<String, f64>> {
    let mut by: BTreeMap<&str, (Vec<u8>, Vec<u8>)> = BTreeMap::new();
    for r in rows {
        let e = by.entry(&r.item_id).or_default();
        e.0.push(r.true_score.unwrap_or(r.predicted));
        e.1.push(r.predicted);
    }
    by.into_iter()
        .map(|(id, (t, p))| {
            let item = items[id];
            Ok((id.to_string(), qwk(&t, &p, item.min_score, item.max_score)?))
        })
        .collect()
}

fn approach_result(
    rows: &[&PredictionRow],
    items: &BTreeMap<&str, &Item>,
    folds: &[usize],
    complete: bool,
) -> Result<ApproachResult> {
    let per_item_qwk = kappa_by_item(rows, items)?;
    let mut per_fold = Vec::new();
    for &f in folds {
        let fr: Vec<&PredictionRow> = rows.iter().copied().filter(|r| r.fold == Some(f)).collect();
        if fr.is_empty() {
            continue;
        }
        let k = kappa_by_item(&fr, items)?;
        per_fold.push(FoldResult {
            fold: f,
            mean_qwk: mean_qwk(&k, |_| true)?,
            per_item_qwk: k,
        });
    }
    let shared = |id: &str| items.get(id).is_some_and(|i| i.is_shared());
    Ok(ApproachResult {
        mean_qwk: mean_qwk(&per_item_qwk, |_| true)?,
        shared_mean_qwk: mean_qwk(&per_item_qwk, shared).ok(),
        non_shared_mean_qwk: mean_qwk(&per_item_qwk, |id| !shared(id)).ok(),
        per_item_qwk,
        per_fold,
        complete,
    })
}

fn t_test_entry(
    a_name: &str,
    a: &ApproachResult,
    r_name: &str,
    r: &ApproachResult,
    pairing: Pairing,
) -> Option<TTestEntry> {
    let (xa, xr): (Vec<f64>, Vec<f64>) = match pairing {
        Pairing::PerItem => a
            .per_item_qwk
            .iter()
            .filter_map(|(k, &v)| r.per_item_qwk.get(k).map(|&w| (v, w)))
            .unzip(),
        Pairing::PerFold => a
            .per_fold
            .iter()
            .filter_map(|f| {
                r.per_fold
                    .iter()
                    .find(|g| g.fold == f.fold)
                    .map(|g| (f.mean_qwk, g.mean_qwk))
            })
            .unzip(),
    };
    let t = paired_t_test(&xa, &xr).ok()?;
    let n = xa.len();
    Some(TTestEntry {
        approach: a_name.to_string(),
        reference: r_name.to_string(),
        pairing,
        n,
        mean_difference: xa.iter().zip(&xr).map(|(x, y)| x - y).sum::<f64>() / n as f64,
        t: t.t,
        p: t.p,
        df: t.df,
        degenerate: t.degenerate,
    })
}

fn records(rows: &[&PredictionRow], responses: &HashMap<&str, &Response>) -> Vec<EvalRecord> {
    rows.iter()
        .map(|r| {
            let resp = responses.get(r.response_id.as_str());
            EvalRecord {
                response_id: r.response_id.clone(),
                item_id: r.item_id.clone(),
                predicted: r.predicted,
                truth: r
                    .true_score
                    .or_else(|| resp.map(|x| adjudicate(x)))
                    .unwrap_or(r.predicted),
                gender: resp.and_then(|x| x.gender.clone()),
                ethnicity: resp.and_then(|x| x.ethnicity.clone()),
            }
        })
        .collect()
}

/// Paths of the files `cmd_crossval` writes under its output directory.
pub struct CrossvalOutputs {
    pub manifest: PathBuf,
    pub report: PathBuf,
    pub summary: PathBuf,
    pub predictions: PathBuf,
}

impl CrossvalOutputs {
    pub fn new(out: &Path) -> Self {
        CrossvalOutputs {
            manifest: out.join("manifest.json"),
            report: out.join("reports").join("report.json"),
            summary: out.join("reports").join("summary.txt"),
            predictions: out.join("reports").join("predictions.csv"),
        }
    }
}

/// K-fold evaluation of every configured approach plus the classical
/// baselines. Each rotation trains on k-2 folds, early-stops on the next
/// fold and tests on its own. Rotations may run on `threads` workers.
pub fn cmd_crossval(cfg: &RunConfig, out: &Path, threads: usize) -> Result<CrossvalReport> {
    let cfg = cfg.clone().finalize()?;
    let (items, responses) = load_corpus(&cfg)?;
    let folds = make_folds(&responses, &items, cfg.folds, cfg.train.seed)?;
    let paths = CrossvalOutputs::new(out);
    let (ip, rp) = cfg.corpus_paths()?;
    let mut manifest = RunManifest::begin(
        "crossval",
        &cfg.hash(),
        [
            ("train".to_string(), cfg.train.seed),
            ("folds".to_string(), folds.seed),
        ]
        .into(),
        &[ip, rp],
    )?;
    manifest.write(&paths.manifest)?;
    let run = manifest.manifest_hash.clone();

    let result = crossval_inner(
        &cfg, &items, &responses, &folds, out, threads, &run, &manifest,
    );
    manifest.finish(result.as_ref().is_ok_and(|r| r.failures.is_empty()));
    manifest.write(&paths.manifest)?;
    let report = result?;
    if let Some(f) = report.failures.first() {
        return Err(Error::Validation(format!(
            "{} of the rotations failed (first: {} fold {}: {}); partial report written",
            report.failures.len(),
            f.approach,
            f.fold,
            f.error
        )));
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn crossval_inner(
    cfg: &RunConfig,
    items: &[Item],
    responses: &[Response],
    folds: &FoldPlan,
    out: &Path,
    threads: usize,
    run: &str,
    manifest: &RunManifest,
) -> Result<CrossvalReport> {
    let paths = CrossvalOutputs::new(out);
    let rotations: Vec<Rotation> = folds.rotations().collect();
    let approaches = cfg.all_approaches();
    let splits: Vec<Split> = rotations
        .iter()
        .map(|&r| split(responses, folds, r))
        .collect::<Result<_>>()?;

    let jobs: Vec<(Approach, usize)> = approaches
        .iter()
        .flat_map(|&a| (0..rotations.len()).map(move |r| (a, r)))
        .collect();
    let outcomes = run_jobs(jobs.len(), threads, |j| {
        let (approach, r) = jobs[j];
        let tcfg = approach.train_config(&cfg.train);
        let name = approach.name();
        log::info!("training {name} on rotation {r}");
        let res: Result<(Vec<PredictionRow>, BTreeMap<String, TrainReport>)> = (|| {
            let scorer = train_on_split(items, &splits[r], &cfg.template, &tcfg)?;
            let rows = scored_rows(
                &scorer,
                &splits[r].test,
                tcfg.resamples,
                tcfg.condition_demographics,
                run,
                &name,
                Some(rotations[r].test),
            )?;
            Ok((rows, scorer.reports))
        })();
        res
    });

    let mut rows: Vec<PredictionRow> = Vec::new();
    let mut failures = Vec::new();
    for ((approach, r), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok((mut rs, reports)) => {
                write_json(
                    &out.join("logs").join(format!(
                        "{}-fold{}.json",
                        approach.name(),
                        rotations[*r].test
                    )),
                    &reports,
                )?;
                rows.append(&mut rs);
            }
            Err(e) => failures.push(Failure {
                approach: approach.name(),
                fold: rotations[*r].test,
                error: e.to_string(),
            }),
        }
    }

    let mut names: Vec<String> = approaches.iter().map(Approach::name).collect();
    if cfg.classical_baselines {
        let resources = cfg.feature_resources()?;
        for (r, sp) in rotations.iter().zip(&splits) {
            let maj = majority_baseline(&sp.train, &sp.test)?;
            rows.extend(label_rows(run, MAJORITY, r.test, &sp.test, &maj));
            let seed = seed::derive(cfg.train.seed, &[seed::label("forest"), r.test as u64]);
            let feat = feature_baseline(items, &sp.train, &sp.test, &cfg.forest, seed, &resources)?;
            rows.extend(label_rows(run, FEATURES, r.test, &sp.test, &feat));
        }
        names.push(MAJORITY.to_string());
        names.push(FEATURES.to_string());
    }
    write_predictions(&paths.predictions, &rows)?;

    let item_map: BTreeMap<&str, &Item> = items.iter().map(|i| (i.item_id.as_str(), i)).collect();
    let resp_map: HashMap<&str, &Response> = responses
        .iter()
        .map(|r| (r.response_id.as_str(), r))
        .collect();
    let fold_ids: Vec<usize> = rotations.iter().map(|r| r.test).collect();
    let mut results = BTreeMap::new();
    let mut bias = BTreeMap::new();
    for name in &names {
        let mine: Vec<&PredictionRow> = rows.iter().filter(|r| &r.approach == name).collect();
        if mine.is_empty() {
            continue;
        }
        let complete = !failures.iter().any(|f| &f.approach == name);
        if complete {
            debug_assert_eq!(
                mine.len(),
                responses.len(),
                "each response tested exactly once"
            );
        }
        results.insert(
            name.clone(),
            approach_result(&mine, &item_map, &fold_ids, complete)?,
        );
        bias.insert(
            name.clone(),
            bias_report(&records(&mine, &resp_map), cfg.grouping),
        );
    }

    let human_agreement: BTreeMap<String, f64> = items
        .iter()
        .filter_map(|i| {
            rater_agreement(responses, i)
                .ok()
                .map(|q| (i.item_id.clone(), q))
        })
        .collect();
    let human_mean_qwk = mean_qwk(&human_agreement, |_| true).ok();

    let mut t_tests = Vec::new();
    if let Some(reference) = results.get(&cfg.reference) {
        for (name, res) in &results {
            if name != &cfg.reference {
                if let Some(t) = t_test_entry(name, res, &cfg.reference, reference, cfg.pairing) {
                    t_tests.push(t);
                }
            }
        }
    } else {
        log::warn!(
            "reference approach {} was not run; no t-tests",
            cfg.reference
        );
    }

    let report = CrossvalReport {
        manifest_hash: manifest.manifest_hash.clone(),
        config_hash: manifest.config_hash.clone(),
        n_folds: folds.n_folds,
        approaches: results,
        human_agreement,
        human_mean_qwk,
        reference: cfg.reference.clone(),
        t_tests,
        grouping: cfg.grouping,
        bias,
        failures,
        unimplemented_baselines: vec!["stacked_lstm".into(), "clustering_classification".into()],
    };
    write_json(&paths.report, &report)?;
    std::fs::write(&paths.summary, report.summary_table())
        .map_err(|e| Error::io(&paths.summary, e))?;
    Ok(report)
}

/// Train the configured variant on every fold but the first, which serves
/// for early stopping, and write a checkpoint.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<(PathBuf, TrainedScorer)> {
    let cfg = cfg.clone().finalize()?;
    let (items, responses) = load_corpus(&cfg)?;
    let folds = make_folds(&responses, &items, cfg.folds, cfg.train.seed)?;
    let (ip, rp) = cfg.corpus_paths()?;
    let config_hash = cfg.hash();
    let mut manifest = RunManifest::begin(
        "train",
        &config_hash,
        [("train".to_string(), cfg.train.seed)].into(),
        &[ip, rp],
    )?;
    let manifest_path = out.join("manifest.json");
    manifest.write(&manifest_path)?;

    let result = (|| {
        let mut sp = Split::default();
        for r in &responses {
            if folds.fold_of(&r.response_id) == Some(0) {
                sp.validation.push(r);
            } else {
                sp.train.push(r);
            }
        }
        let scorer = train_on_split(&items, &sp, &cfg.template, &cfg.train)?;
        let ck_path = out.join("checkpoints").join("model.json");
        std::fs::create_dir_all(out.join("checkpoints")).map_err(|e| Error::io(out, e))?;
        scorer.to_checkpoint(&config_hash).save(&ck_path)?;
        #[derive(Serialize)]
        struct TrainOutput<'a> {
            manifest_hash: &'a str,
            variant: &'a str,
            input_ablation: &'a str,
            total_parameters: usize,
            reports: &'a BTreeMap<String, TrainReport>,
        }
        write_json(
            &out.join("reports").join("train_report.json"),
            &TrainOutput {
                manifest_hash: &manifest.manifest_hash,
                variant: scorer.variant.name(),
                input_ablation: scorer.pipeline.ablation.name(),
                total_parameters: scorer.total_parameters(),
                reports: &scorer.reports,
            },
        )?;
        Ok((ck_path, scorer))
    })();
    manifest.finish(result.is_ok());
    manifest.write(&manifest_path)?;
    result
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreOptions {
    pub resamples: usize,
    pub condition_demographics: bool,
    /// Template the caller expects; refused when it differs from training.
    pub template: Option<PathBuf>,
}

/// Score a responses file with a checkpoint; writes the prediction table to
/// `out` and its manifest next to it.
pub fn cmd_score(
    checkpoint: &Path,
    responses_path: &Path,
    out: &Path,
    opts: &ScoreOptions,
) -> Result<Vec<PredictionRow>> {
    let ck = Checkpoint::load(checkpoint)?;
    if let Some(t) = &opts.template {
        ck.check_template(&TemplateConfig::load(t)?)?;
    }
    if opts.resamples == 0 {
        return Err(Error::Config("resamples must be at least 1".into()));
    }
    let text = std::fs::read_to_string(responses_path).map_err(|e| Error::io(responses_path, e))?;
    let responses = if text.trim().is_empty() {
        Vec::new()
    } else {
        read_responses(responses_path, &text, &ck.items)?
    };
    let mut manifest = RunManifest::begin(
        "score",
        &ck.config_hash,
        [("predict".to_string(), ck.seed)].into(),
        &[responses_path, checkpoint],
    )?;
    let manifest_path = PathBuf::from(format!("{}.manifest.json", out.display()));
    manifest.write(&manifest_path)?;
    let result = (|| {
        let scorer = TrainedScorer::from_checkpoint(&ck)?;
        let refs: Vec<&Response> = responses.iter().collect();
        let name = format!("{}+{}", ck.variant.name(), ck.ablation.name());
        let rows = scored_rows(
            &scorer,
            &refs,
            opts.resamples,
            opts.condition_demographics,
            &manifest.manifest_hash,
            &name,
            None,
        )?;
        write_predictions(out, &rows)?;
        Ok(rows)
    })();
    manifest.finish(result.is_ok());
    manifest.write(&manifest_path)?;
    result
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub overall: BiasReport,
    pub per_item: BTreeMap<String, BiasReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub run: String,
    pub grouping: Grouping,
    /// Keyed by the approach column of the prediction table.
    pub approaches: BTreeMap<String, AuditEntry>,
}

/// Bias of predicted against adjudicated scores by demographic group.
pub fn cmd_audit(
    predictions: &Path,
    items_path: &Path,
    responses_path: &Path,
    grouping: Grouping,
    out: &Path,
) -> Result<AuditReport> {
    let rows = read_predictions(predictions)?;
    let items = load_items(items_path)?;
    let responses = load_responses(responses_path, &items)?;
    let resp_map: HashMap<&str, &Response> = responses
        .iter()
        .map(|r| (r.response_id.as_str(), r))
        .collect();
    let missing: Vec<&str> = rows
        .iter()
        .filter(|r| !resp_map.contains_key(r.response_id.as_str()))
        .map(|r| r.response_id.as_str())
        .collect();
    if !missing.is_empty() {
        let shown: Vec<&str> = missing.iter().take(10).copied().collect();
        return Err(Error::Reference(format!(
            "{} prediction ids do not resolve to responses: {}{}",
            missing.len(),
            shown.join(", "),
            if missing.len() > shown.len() {
                ", ..."
            } else {
                ""
            }
        )));
    }
    let mut by_approach: BTreeMap<&str, Vec<EvalRecord>> = BTreeMap::new();
    for row in &rows {
        let r = resp_map[row.response_id.as_str()];
        by_approach
            .entry(&row.approach)
            .or_default()
            .push(EvalRecord {
                response_id: row.response_id.clone(),
                item_id: r.item_id.clone(),
                predicted: row.predicted,
                truth: adjudicate(r),
                gender: r.gender.clone(),
                ethnicity: r.ethnicity.clone(),
            });
    }
    let approaches = by_approach
        .into_iter()
        .map(|(name, recs)| {
            let mut per_item_recs: BTreeMap<String, Vec<EvalRecord>> = BTreeMap::new();
            for rec in &recs {
                per_item_recs
                    .entry(rec.item_id.clone())
                    .or_default()
                    .push(rec.clone());
            }
            let entry = AuditEntry {
                overall: bias_report(&recs, grouping),
                per_item: per_item_recs
                    .into_iter()
                    .map(|(k, v)| (k, bias_report(&v, grouping)))
                    .collect(),
            };
            (name.to_string(), entry)
        })
        .collect();
    let report = AuditReport {
        run: rows.first().map(|r| r.run.clone()).unwrap_or_default(),
        grouping,
        approaches,
    };
    write_json(out, &report)?;
    Ok(report)
}
