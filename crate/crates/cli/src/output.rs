use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, RunConfig};

/// Stamped into every JSON artifact and the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(command: &'static str, config: &RunConfig) -> Self {
        Provenance {
            tool: "epicast",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: config.seed,
            config_hash: config.hash(),
        }
    }

    pub fn as_map(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("tool".to_string(), self.tool.to_string()),
            ("version".to_string(), self.version.to_string()),
            ("command".to_string(), self.command.to_string()),
            ("seed".to_string(), self.seed.to_string()),
            ("config_hash".to_string(), self.config_hash.clone()),
        ])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionError {
    pub region_id: String,
    pub error: String,
}

/// Writes files under one output directory and records their digests.
/// CSV files cannot carry metadata, so `manifest.json` ties every file to
/// the run's provenance.
pub struct Artifacts {
    root: PathBuf,
    provenance: Provenance,
    files: BTreeMap<String, String>,
}

impl Artifacts {
    pub fn new(root: &Path, provenance: Provenance) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Artifacts { root: root.to_path_buf(), provenance, files: BTreeMap::new() })
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.insert(rel.to_string(), hex(&Sha256::digest(bytes)));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    pub fn finish(self, failures: &[RegionError]) -> Result<usize> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            provenance: &'a Provenance,
            files: &'a BTreeMap<String, String>,
            failures: &'a [RegionError],
        }
        let n = self.files.len();
        let manifest = Manifest { provenance: &self.provenance, files: &self.files, failures };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.root.join("manifest.json");
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(n)
    }
}

/// Region id made safe for use as a file stem.
pub fn file_stem(region_id: &str) -> String {
    let stem: String = region_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    if stem.is_empty() || stem.starts_with('.') {
        format!("_{stem}")
    } else {
        stem
    }
}
