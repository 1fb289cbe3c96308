use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub start_time: String,
    pub end_time: String,
    pub wall_seconds: f64,
    pub status: String,
    pub outputs: Vec<OutputEntry>,
}

/// Collects the artifacts of one run. Every file written through it is
/// listed, with its hash, in the manifest; JSON artifacts also name the
/// manifest themselves.
pub struct OutputDir {
    root: PathBuf,
    entries: Vec<OutputEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), entries: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        fs::write(self.root.join(name), bytes)?;
        self.entries.push(OutputEntry { file: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Tagged<'a, T> {
            manifest: &'static str,
            #[serde(flatten)]
            body: &'a T,
        }
        let mut bytes = serde_json::to_vec_pretty(&Tagged { manifest: MANIFEST_FILE, body: value })?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn finish(self, mut manifest: Manifest) -> std::io::Result<()> {
        manifest.outputs = self.entries;
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(self.root.join(MANIFEST_FILE), bytes)
    }
}
