use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Provenance of one command invocation. The hash covers everything except
/// the timestamps and status, so reruns with equal inputs share it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub corpus_digests: BTreeMap<String, String>,
    pub versions: BTreeMap<String, String>,
    pub started_at: u64,
    pub finished_at: Option<u64>,
    pub status: String,
    pub manifest_hash: String,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn begin(
        command: &str,
        config_hash: &str,
        seeds: BTreeMap<String, u64>,
        corpus: &[&Path],
    ) -> Result<Self> {
        let mut corpus_digests = BTreeMap::new();
        for p in corpus {
            let name = p.file_name().map_or_else(
                || p.display().to_string(),
                |n| n.to_string_lossy().into_owned(),
            );
            corpus_digests.insert(name, file_digest(p)?);
        }
        let versions = [("icscore".to_string(), env!("CARGO_PKG_VERSION").to_string())].into();
        let mut m = RunManifest {
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            seeds,
            corpus_digests,
            versions,
            started_at: now(),
            finished_at: None,
            status: "running".into(),
            manifest_hash: String::new(),
        };
        m.manifest_hash = m.compute_hash();
        Ok(m)
    }

    fn compute_hash(&self) -> String {
        let key = serde_json::json!({
            "command": self.command,
            "config_hash": self.config_hash,
            "seeds": self.seeds,
            "corpus_digests": self.corpus_digests,
            "versions": self.versions,
        });
        hex::encode(Sha256::digest(key.to_string().as_bytes()))
    }

    pub fn verify(&self) -> bool {
        self.compute_hash() == self.manifest_hash
    }

    pub fn finish(&mut self, ok: bool) {
        self.finished_at = Some(now());
        self.status = if ok { "ok" } else { "failed" }.into();
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
