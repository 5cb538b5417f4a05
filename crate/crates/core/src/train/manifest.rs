use std::path::Path;

use sha2::{Digest, Sha256};

use super::TrainConfig;
use crate::error::Result;
use crate::io::write_atomic;

/// Git-style object hash: SHA-256 over `"blob <len>\0"` followed by the bytes.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(cfg: &TrainConfig, dataset_manifest: &[u8]) -> Result<Self> {
        let model = cfg.resolved_model()?;
        let mut entries = vec![
            ("seed".to_string(), cfg.seed.to_string()),
            ("dataset_manifest_hash".to_string(), git_blob_hash(dataset_manifest)),
            (
                "param_count".to_string(),
                crate::model::param_count(&model)?.to_string(),
            ),
            ("train.iterations".to_string(), cfg.iterations.to_string()),
            ("train.batch".to_string(), cfg.batch_size.to_string()),
            ("train.lr".to_string(), cfg.adam.lr.to_string()),
            ("train.beta1".to_string(), cfg.adam.beta1.to_string()),
            ("train.beta2".to_string(), cfg.adam.beta2.to_string()),
            ("train.eps".to_string(), cfg.adam.eps.to_string()),
            (
                "train.budget".to_string(),
                cfg.budget.map_or("none".to_string(), |b| b.to_string()),
            ),
            ("train.smoothing_window".to_string(), cfg.smoothing_window.to_string()),
            ("prng".to_string(), "chacha8".to_string()),
        ];
        for (k, v) in model.to_pairs() {
            entries.push((format!("model.{k}"), v));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }
}
