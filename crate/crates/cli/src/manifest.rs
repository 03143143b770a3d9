//! Run manifests: the materialized config, hashes of every artifact and
//! provenance. `reproduce` reruns the config and byte-compares.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::run::Artifact;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub task: String,
    pub gaplab_version: String,
    pub seed: u64,
    pub workers: usize,
    pub wall_time_s: f64,
    pub artifacts: Vec<ArtifactRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, artifacts: &[Artifact], workers: usize, wall_time_s: f64) -> Self {
        Manifest {
            config: config.clone(),
            config_hash: config.hash(),
            task: config.task.name().into(),
            gaplab_version: env!("CARGO_PKG_VERSION").into(),
            seed: config.numerics.seed,
            workers,
            wall_time_s,
            artifacts: artifacts
                .iter()
                .map(|a| ArtifactRecord { path: a.name.clone(), sha256: sha256_hex(&a.bytes), bytes: a.bytes.len() })
                .collect(),
        }
    }
}

/// Writes the artifacts and the manifest into `dir`.
pub fn write_all(dir: &Path, artifacts: &[Artifact], manifest: &Manifest) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    for a in artifacts {
        fs::write(dir.join(&a.name), &a.bytes)?;
    }
    let path = dir.join(MANIFEST_NAME);
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Difference {
    pub path: String,
    pub expected_sha256: Option<String>,
    pub actual_sha256: Option<String>,
    /// 1-based line of the first difference against the file next to the
    /// manifest, when that file exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_differing_line: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproduceReport {
    pub identical: bool,
    pub config_hash_matches: bool,
    pub differences: Vec<Difference>,
}

fn first_differing_line(a: &[u8], b: &[u8]) -> usize {
    let mut la = a.split(|&c| c == b'\n');
    let mut lb = b.split(|&c| c == b'\n');
    let mut line = 1;
    loop {
        match (la.next(), lb.next()) {
            (Some(x), Some(y)) if x == y => line += 1,
            (None, None) => return line,
            _ => return line,
        }
    }
}

/// Compares freshly computed artifacts against the manifest records.
pub fn compare(manifest: &Manifest, manifest_dir: &Path, fresh: &[Artifact]) -> ReproduceReport {
    let mut differences = Vec::new();
    for rec in &manifest.artifacts {
        let now = fresh.iter().find(|a| a.name == rec.path);
        let actual = now.map(|a| sha256_hex(&a.bytes));
        if actual.as_deref() != Some(rec.sha256.as_str()) {
            let on_disk = fs::read(manifest_dir.join(&rec.path)).ok();
            let first_differing_line = match (on_disk, now) {
                (Some(old), Some(new)) if sha256_hex(&old) == rec.sha256 => Some(first_differing_line(&old, &new.bytes)),
                _ => None,
            };
            differences.push(Difference {
                path: rec.path.clone(),
                expected_sha256: Some(rec.sha256.clone()),
                actual_sha256: actual,
                first_differing_line,
            });
        }
    }
    for a in fresh {
        if !manifest.artifacts.iter().any(|r| r.path == a.name) {
            differences.push(Difference {
                path: a.name.clone(),
                expected_sha256: None,
                actual_sha256: Some(sha256_hex(&a.bytes)),
                first_differing_line: None,
            });
        }
    }
    let config_hash_matches = manifest.config.hash() == manifest.config_hash;
    ReproduceReport { identical: differences.is_empty() && config_hash_matches, config_hash_matches, differences }
}
