//! Run manifests and output-directory locking.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Record of one pipeline stage inside a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// Named counts, e.g. records in/out, rejects, batches.
    pub counts: BTreeMap<String, u64>,
    pub duration_ms: u64,
}

/// Manifest emitted for every run. With identical config and inputs, every
/// field except the timings is identical across runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config_hash: &str, seed: u64) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            subcommand: subcommand.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            stages: Vec::new(),
        }
    }

    pub fn write(&self, output_dir: &Path) -> Result<PathBuf> {
        let path = output_dir.join(format!("manifest-{}.json", self.subcommand));
        let body = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Times one stage and records it on completion.
pub struct StageTimer {
    name: String,
    started: Instant,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub counts: BTreeMap<String, u64>,
}

impl StageTimer {
    pub fn start(name: &str) -> Self {
        Self {
            name: name.to_string(),
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            counts: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: impl AsRef<Path>) {
        self.inputs.push(path.as_ref().display().to_string());
    }

    pub fn output(&mut self, path: impl AsRef<Path>) {
        self.outputs.push(path.as_ref().display().to_string());
    }

    pub fn count(&mut self, key: &str, value: u64) {
        self.counts.insert(key.to_string(), value);
    }

    pub fn finish(self, manifest: &mut RunManifest) {
        manifest.stages.push(StageRecord {
            name: self.name,
            inputs: self.inputs,
            outputs: self.outputs,
            counts: self.counts,
            duration_ms: self.started.elapsed().as_millis() as u64,
        });
    }
}

/// Exclusive ownership of an output directory for the duration of a run.
/// The lock file is removed on drop; a pre-existing lock is a hard error
/// naming the owner.
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(output_dir: &Path) -> Result<Self> {
        fs::create_dir_all(output_dir)
            .with_context(|| format!("creating {}", output_dir.display()))?;
        let path = output_dir.join(".ipforge.lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                use std::io::Write;
                let _ = writeln!(f, "pid {}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                let owner = fs::read_to_string(&path).unwrap_or_default();
                bail!(
                    "output directory {} is locked by another run ({}); remove {} if stale",
                    output_dir.display(),
                    owner.trim(),
                    path.display()
                );
            }
            Err(e) => Err(e).with_context(|| format!("creating lock {}", path.display())),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
