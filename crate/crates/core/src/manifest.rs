//! Per-stage run manifests: configuration, seed, and SHA-256 checksums of
//! every input and output, chained to the manifests of the inputs.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
    /// Checksum of the manifest that produced this input, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub producer_manifest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub stage: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// `<dir>/manifest.<stage>.json`.
pub fn manifest_path(dir: &Path, stage: &str) -> PathBuf {
    dir.join(format!("manifest.{stage}.json"))
}

/// Find the manifest in `input`'s directory whose outputs list `input`.
fn producer_of(input: &Path, sha: &str) -> Option<String> {
    let dir = input.parent()?;
    let dir = if dir.as_os_str().is_empty() {
        Path::new(".")
    } else {
        dir
    };
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .ok()?
        .flatten()
        .map(|e| e.path())
        .collect();
    entries.sort();
    entries.into_iter().find_map(|p| {
        let name = p.file_name()?.to_str()?;
        if !(name.starts_with("manifest.") && name.ends_with(".json")) {
            return None;
        }
        let text = std::fs::read_to_string(&p).ok()?;
        let m: RunManifest = serde_json::from_str(&text).ok()?;
        m.outputs
            .iter()
            .any(|o| o.sha256 == sha)
            .then(|| hex::encode(Sha256::digest(text.as_bytes())))
    })
}

/// Collects a stage's provenance while it runs.
pub struct ManifestBuilder {
    stage: String,
    seed: Option<u64>,
    config: BTreeMap<String, String>,
    inputs: Vec<PathBuf>,
    started_at: String,
}

impl ManifestBuilder {
    pub fn new(stage: &str, seed: Option<u64>, config: BTreeMap<String, String>) -> Self {
        ManifestBuilder {
            stage: stage.to_string(),
            seed,
            config,
            inputs: Vec::new(),
            started_at: now(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Hash inputs and outputs and write the manifest into `dir`.
    pub fn finish(self, dir: &Path, outputs: &[PathBuf]) -> Result<RunManifest> {
        let mut inputs = Vec::with_capacity(self.inputs.len());
        for p in &self.inputs {
            let sha = sha256_file(p)?;
            inputs.push(FileRecord {
                path: p.clone(),
                producer_manifest: producer_of(p, &sha),
                sha256: sha,
            });
        }
        let mut outs = Vec::with_capacity(outputs.len());
        for p in outputs {
            outs.push(FileRecord {
                path: p.clone(),
                sha256: sha256_file(p)?,
                producer_manifest: None,
            });
        }
        let manifest = RunManifest {
            manifest_version: MANIFEST_VERSION,
            stage: self.stage,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            config: self.config,
            inputs,
            outputs: outs,
            started_at: self.started_at,
            finished_at: now(),
        };
        crate::io::write_json(&manifest_path(dir, &manifest.stage), &manifest)?;
        Ok(manifest)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
