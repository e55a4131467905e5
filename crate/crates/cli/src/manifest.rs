use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    /// Arguments after the program name, exactly as given.
    pub command: Vec<String>,
    /// Working directory the arguments are relative to.
    pub cwd: PathBuf,
    pub resolved: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let raw: serde_json::Value = serde_json::from_str(&text)?;
        match raw.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == MANIFEST_FORMAT_VERSION as u64 => {}
            other => bail!(
                "unsupported manifest format version {} (expected {MANIFEST_FORMAT_VERSION})",
                other.map_or("missing".to_string(), |v| v.to_string())
            ),
        }
        Ok(serde_json::from_value(raw)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing manifest {}", path.display()))
    }
}

/// `dir/name.csv` → `dir/name.manifest.json`.
pub fn manifest_path(primary: &Path) -> PathBuf {
    let stem = primary.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    primary.with_file_name(format!("{stem}.manifest.json"))
}
