//! Run manifests: which artifacts a pipeline produced, under which
//! configuration and seed.
//!
//! The manifest is the only output allowed to carry wall-clock time;
//! every other artifact must be a pure function of config and seed so
//! rerunning a pipeline reproduces it byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Inventory of one output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    /// Hash of the effective configuration the last command ran with.
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
    /// When the manifest was last written (RFC 3339, UTC).
    pub created_utc: String,
    /// Relative artifact path -> sha256 of the file contents.
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the effective configuration (canonical JSON serialization).
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    Ok(sha256_hex(serde_json::to_string(config)?.as_bytes()))
}

fn relative_key(out_dir: &Path, artifact: &Path) -> Result<String> {
    let rel = artifact.strip_prefix(out_dir).map_err(|_| {
        Error::Parameter(format!(
            "artifact {} lies outside the output directory {}",
            artifact.display(),
            out_dir.display()
        ))
    })?;
    let parts: Vec<String> = rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    Ok(parts.join("/"))
}

impl RunManifest {
    /// Merge newly produced artifacts into the directory's manifest and
    /// write it back. Creates the manifest on first use; artifacts from
    /// earlier commands in the same directory stay listed.
    pub fn update(
        out_dir: &Path,
        config: &ExperimentConfig,
        artifacts: &[PathBuf],
    ) -> Result<RunManifest> {
        let path = out_dir.join(MANIFEST_FILE);
        let mut entries = match RunManifest::load(out_dir) {
            Ok(existing) => existing.artifacts,
            Err(_) => BTreeMap::new(),
        };
        for artifact in artifacts {
            let bytes = std::fs::read(artifact)?;
            entries.insert(relative_key(out_dir, artifact)?, sha256_hex(&bytes));
        }
        let manifest = RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            config_hash: config_hash(config)?,
            seed: config.train.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            created_utc: chrono::Utc::now().to_rfc3339(),
            artifacts: entries,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(manifest)
    }

    pub fn load(out_dir: &Path) -> Result<RunManifest> {
        let path = out_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)?;
        let manifest: RunManifest = serde_json::from_str(&text)?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "manifest schema version {} unsupported (expected {MANIFEST_SCHEMA_VERSION})",
                manifest.schema_version
            )));
        }
        Ok(manifest)
    }

    /// Check the directory against the manifest: every listed artifact
    /// must exist with a matching hash, and every file in the directory
    /// (except the manifest itself) must be listed.
    pub fn verify(out_dir: &Path) -> Result<RunManifest> {
        let manifest = RunManifest::load(out_dir)?;
        for (rel, expected) in &manifest.artifacts {
            let path = out_dir.join(rel);
            let bytes = std::fs::read(&path).map_err(|e| {
                Error::Validation(format!("manifest artifact {rel} unreadable: {e}"))
            })?;
            let actual = sha256_hex(&bytes);
            if actual != *expected {
                return Err(Error::Validation(format!(
                    "manifest artifact {rel} hash mismatch: {actual} vs recorded {expected}"
                )));
            }
        }
        let mut stack = vec![out_dir.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in std::fs::read_dir(&dir)? {
                let path = entry?.path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    let rel = relative_key(out_dir, &path)?;
                    if rel != MANIFEST_FILE && !manifest.artifacts.contains_key(&rel) {
                        return Err(Error::Validation(format!(
                            "orphan artifact not listed in the manifest: {rel}"
                        )));
                    }
                }
            }
        }
        Ok(manifest)
    }
}
