//! Run provenance: the manifest hashed into the run id, plus a timing sidecar.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize)]
pub struct InputFingerprint {
    pub role: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Everything an output depends on. Contains no paths and no clock readings,
/// so identical invocations hash to the same run id.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: Value,
    pub inputs: Vec<InputFingerprint>,
    pub seed: Option<u64>,
}

impl RunManifest {
    pub fn new(command: &'static str, config: Value, seed: Option<u64>) -> Self {
        Self {
            tool: "evolvid",
            version: TOOL_VERSION,
            command,
            config,
            inputs: Vec::new(),
            seed,
        }
    }

    pub fn add_input(&mut self, role: impl Into<String>, content: &[u8]) {
        self.inputs.push(InputFingerprint {
            role: role.into(),
            sha256: sha256_hex(content),
            bytes: content.len() as u64,
        });
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("manifest serializes")
    }

    pub fn run_id(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serializes");
        sha256_hex(&bytes)[..16].to_string()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
struct StageTiming {
    stage: String,
    millis: f64,
}

/// Wall-clock timing kept apart from the hashed manifest.
#[derive(Debug)]
pub struct Timer {
    started_unix_ms: u128,
    start: Instant,
    last: Instant,
    stages: Vec<StageTiming>,
}

impl Timer {
    pub fn start() -> Self {
        let now = Instant::now();
        Self {
            started_unix_ms: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0),
            start: now,
            last: now,
            stages: Vec::new(),
        }
    }

    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push(StageTiming {
            stage: name.to_string(),
            millis: (now - self.last).as_secs_f64() * 1e3,
        });
        self.last = now;
    }

    fn to_value(&self) -> Value {
        serde_json::json!({
            "started_unix_ms": self.started_unix_ms,
            "total_ms": self.start.elapsed().as_secs_f64() * 1e3,
            "stages": self.stages,
        })
    }
}

/// Writes `{run_id, manifest, timing}` as pretty JSON.
pub fn write_manifest_file(path: &Path, manifest: &RunManifest, timer: &Timer) -> Result<()> {
    let doc = serde_json::json!({
        "run_id": manifest.run_id(),
        "manifest": manifest,
        "timing": timer.to_value(),
    });
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `out/<run-id>` with the standard subdirectories created.
pub fn run_dir(base: &Path, manifest: &RunManifest, subdirs: &[&str]) -> Result<PathBuf> {
    let dir = base.join(manifest.run_id());
    for s in subdirs {
        let d = dir.join(s);
        std::fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
    }
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}
