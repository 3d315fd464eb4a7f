use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const FILE_NAME: &str = "manifest.json";

/// The stages that produced the artifacts in one directory, in run order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub stages: Vec<StageRecord>,
}

/// One stage run: its fully resolved arguments (seeds and thresholds
/// included) and the files it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub args: Vec<String>,
    pub outputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Replaces the record with the same stage and outputs, or appends.
    pub fn upsert(&mut self, record: StageRecord) {
        match self
            .stages
            .iter_mut()
            .find(|r| r.stage == record.stage && r.outputs == record.outputs)
        {
            Some(slot) => *slot = record,
            None => self.stages.push(record),
        }
    }
}

pub fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_owned())
}

/// Adds `record` to the manifest in `dir`, creating it if needed.
pub fn record(dir: &Path, record: StageRecord) -> Result<()> {
    let path = dir.join(FILE_NAME);
    let mut manifest = if path.exists() {
        Manifest::read(&path)?
    } else {
        Manifest {
            format_version: 1,
            stages: Vec::new(),
        }
    };
    manifest.upsert(record);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

/// Directory that holds `file`, for files given as bare names.
pub fn parent_dir(file: &Path) -> PathBuf {
    match absolute(file).parent() {
        Some(p) => p.to_owned(),
        None => PathBuf::from("."),
    }
}
