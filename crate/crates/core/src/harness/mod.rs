//! Command entry points, run configuration, manifests and report emission.
//!
//! A run directory holds `manifest.json`, `checkpoints/`, `reports/` and
//! `logs/`. Every report and prediction table carries the manifest hash,
//! which covers the command, configuration hash, seeds, corpus digests and
//! crate version but not timestamps.

mod commands;
mod config;
mod manifest;
mod report;

pub use commands::{
    cmd_audit, cmd_crossval, cmd_score, cmd_synth, cmd_train, AuditEntry, AuditReport,
    CrossvalOutputs, ScoreOptions, SynthSummary,
};
pub use config::{baseline_grid, Approach, Pairing, RunConfig, FEATURES, MAJORITY};
pub use manifest::{file_digest, RunManifest};
pub use report::{
    read_predictions, write_predictions, ApproachResult, CrossvalReport, Failure, FoldResult,
    PredictionRow, TTestEntry,
};
