use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Every file a run wrote, sorted by path. Holds no timings or absolute
/// paths, so identical runs produce identical manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub seed: u64,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn get(&self, path: &str) -> Option<&ManifestEntry> {
        self.files.iter().find(|f| f.path == path)
    }
}

/// Writes files under a run directory and remembers their hashes.
pub(crate) struct Artifacts {
    root: PathBuf,
    written: BTreeMap<String, ManifestEntry>,
}

impl Artifacts {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf(), written: BTreeMap::new() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, String> {
        let contents = contents.as_ref();
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| format!("{}: {e}", parent.display()))?;
        }
        fs::write(&path, contents).map_err(|e| format!("{}: {e}", path.display()))?;
        let entry = ManifestEntry { path: rel.to_string(), sha256: hex::encode(Sha256::digest(contents)), bytes: contents.len() as u64 };
        self.written.insert(rel.to_string(), entry);
        Ok(path)
    }

    pub fn manifest(&self, run_id: &str, seed: u64) -> Manifest {
        Manifest { run_id: run_id.to_string(), seed, files: self.written.values().cloned().collect() }
    }
}
