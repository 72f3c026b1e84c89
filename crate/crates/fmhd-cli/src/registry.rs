//! Append-only run registry.
//!
//! One JSON record per line in `<out>/registry.jsonl`. Records never mutate;
//! re-running an identical configuration appends a new record with the same
//! run id and, for deterministic scenarios, the same result hash. The run id
//! is the content hash of the fully resolved configuration, so sweeps
//! deduplicate naturally and acceptance runs are reproducible by id.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub schema: u32,
    pub scenario: String,
    /// Unix seconds; excluded from every hash.
    pub timestamp: u64,
    pub status: String,
    /// Hash over all artifact bytes (sorted by name); stable across repeats
    /// of a deterministic scenario.
    pub result_hash: String,
    pub config: BTreeMap<String, String>,
    pub metrics: BTreeMap<String, serde_json::Value>,
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn run_id(config: &RunConfig) -> String {
    let digest = Sha256::digest(config.canonical().as_bytes());
    hex::encode(&digest[..8])
}

pub fn result_hash(artifacts: &[(String, String)]) -> String {
    let mut sorted: Vec<&(String, String)> = artifacts.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut hasher = Sha256::new();
    for (name, body) in sorted {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
        hasher.update(body.as_bytes());
        hasher.update([0u8]);
    }
    hex::encode(&hasher.finalize()[..16])
}

pub fn append(out_dir: &Path, record: &RunRecord) -> std::io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("registry.jsonl");
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let line = serde_json::to_string(record).expect("record serializes");
    writeln!(file, "{line}")
}

pub fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, Scenario};

    #[test]
    fn identical_configs_share_a_run_id() {
        let text = "scenario = bootstrap\nalpha = 1\nbeta = 1\ngamma = 0.3\n";
        let a = parse_config(text, Scenario::Bootstrap).unwrap();
        let b = parse_config(text, Scenario::Bootstrap).unwrap();
        assert_eq!(run_id(&a), run_id(&b));
    }

    #[test]
    fn result_hash_ignores_artifact_order() {
        let a = vec![
            ("x.csv".to_string(), "1,2\n".to_string()),
            ("y.csv".to_string(), "3,4\n".to_string()),
        ];
        let mut b = a.clone();
        b.reverse();
        assert_eq!(result_hash(&a), result_hash(&b));
        let c = vec![("x.csv".to_string(), "1,9\n".to_string())];
        assert_ne!(result_hash(&a), result_hash(&c));
    }
}
