//! Run manifests: what was asked for, what ran, and digests of every output.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellState {
    Done,
    Partial,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStatus {
    pub d: usize,
    pub n: usize,
    pub state: CellState,
    pub successful: usize,
    pub failed: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub master_seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub config: serde_json::Value,
    pub cells: Vec<CellStatus>,
    pub files: Vec<FileDigest>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn digest_file(path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileDigest {
        name: path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}

impl Manifest {
    pub fn new(command: &str, master_seed: u64, config: serde_json::Value, started_unix: u64) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            master_seed,
            started_unix,
            finished_unix: started_unix,
            config,
            cells: vec![],
            files: vec![],
        }
    }

    /// Digests `names` inside `dir`, stamps the finish time and writes the manifest there.
    pub fn finish(mut self, dir: &Path, names: &[String]) -> Result<Self> {
        self.files = names
            .iter()
            .map(|n| digest_file(&dir.join(n)))
            .collect::<Result<_>>()?;
        self.finished_unix = unix_now();
        let path = dir.join(MANIFEST_NAME);
        super::output::write_file(&path, &super::output::to_json(&self))?;
        Ok(self)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mismatch {
    Missing(String),
    Changed { name: String, expected: String, found: String },
}

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mismatch::Missing(n) => write!(f, "{n}: missing"),
            Mismatch::Changed { name, expected, found } => {
                write!(f, "{name}: sha256 {found} does not match recorded {expected}")
            }
        }
    }
}

/// Re-hashes every file listed in the manifest in `dir`.
pub fn verify(dir: &Path) -> Result<Vec<Mismatch>> {
    let m = Manifest::load(dir)?;
    let mut out = Vec::new();
    for f in &m.files {
        let path = dir.join(&f.name);
        if !path.exists() {
            out.push(Mismatch::Missing(f.name.clone()));
            continue;
        }
        let now = digest_file(&path)?;
        if now.sha256 != f.sha256 {
            out.push(Mismatch::Changed {
                name: f.name.clone(),
                expected: f.sha256.clone(),
                found: now.sha256,
            });
        }
    }
    Ok(out)
}
