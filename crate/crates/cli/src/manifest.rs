//! Run bookkeeping: input digests, staged outputs, and the manifest that
//! ties them together. Outputs are held in memory until the run succeeds,
//! then all are written through temp files and renamed together.

use std::io::Write;
use std::path::{Path, PathBuf};

use l2v_core::tensor_store::ActivationMatrix;
use l2v_core::{Error, Result};
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub role: String,
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    tool: Tool,
    subcommand: &'a str,
    config: &'a Value,
    inputs: &'a [FileRecord],
    outputs: &'a [FileRecord],
    results: &'a Map<String, Value>,
    /// Seconds since the Unix epoch; excluded from determinism checks.
    timestamp: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn record(role: &str, path: &Path, bytes: &[u8]) -> FileRecord {
    FileRecord {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len() as u64,
    }
}

#[derive(Debug)]
pub struct Run {
    subcommand: &'static str,
    manifest_path: Option<PathBuf>,
    config: Value,
    inputs: Vec<FileRecord>,
    outputs: Vec<(FileRecord, PathBuf, Vec<u8>)>,
    results: Map<String, Value>,
}

impl Run {
    pub fn new(subcommand: &'static str, manifest_path: Option<PathBuf>) -> Self {
        Run {
            subcommand,
            manifest_path,
            config: Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
            results: Map::new(),
        }
    }

    pub fn set_config(&mut self, config: impl Serialize) {
        self.config = serde_json::to_value(config).expect("config serializes");
    }

    /// Reads an input once, recording its digest.
    pub fn read_input(&mut self, role: &str, path: &Path) -> Result<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.push(record(role, path, &bytes));
        Ok(bytes)
    }

    pub fn read_tensor(&mut self, role: &str, path: &Path) -> Result<ActivationMatrix<f64>> {
        let bytes = self.read_input(role, path)?;
        ActivationMatrix::from_bytes(&bytes)
    }

    pub fn read_json<T: serde::de::DeserializeOwned>(&mut self, role: &str, path: &Path) -> Result<T> {
        let bytes = self.read_input(role, path)?;
        serde_json::from_slice(&bytes)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn output(&mut self, role: &str, path: &Path, bytes: Vec<u8>) -> Result<()> {
        if self.outputs.iter().any(|(_, p, _)| p == path) {
            return Err(Error::InvalidConfig(format!(
                "{} is named as more than one output",
                path.display()
            )));
        }
        self.outputs.push((record(role, path, &bytes), path.to_path_buf(), bytes));
        Ok(())
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) {
        self.results
            .insert(key.to_string(), serde_json::to_value(value).expect("result serializes"));
    }

    pub fn results(&self) -> &Map<String, Value> {
        &self.results
    }

    fn manifest_path(&self) -> PathBuf {
        match (&self.manifest_path, self.outputs.first()) {
            (Some(p), _) => p.clone(),
            (None, Some((_, p, _))) => p.with_extension("manifest.json"),
            (None, None) => PathBuf::from(format!("{}.manifest.json", self.subcommand)),
        }
    }

    pub fn manifest_bytes(&self, timestamp: u64) -> Vec<u8> {
        let outputs: Vec<FileRecord> = self.outputs.iter().map(|(r, _, _)| r.clone()).collect();
        let m = Manifest {
            schema_version: SCHEMA_VERSION,
            tool: Tool {
                name: "l2v",
                version: env!("CARGO_PKG_VERSION"),
            },
            subcommand: self.subcommand,
            config: &self.config,
            inputs: &self.inputs,
            outputs: &outputs,
            results: &self.results,
            timestamp,
        };
        let mut bytes = serde_json::to_vec_pretty(&m).expect("manifest serializes");
        bytes.push(b'\n');
        bytes
    }

    /// Writes every output and then the manifest. Nothing lands at a final
    /// path unless all temp files were written.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let manifest_path = self.manifest_path();
        let manifest = self.manifest_bytes(timestamp());
        let mut files: Vec<(&Path, &[u8])> =
            self.outputs.iter().map(|(_, p, b)| (p.as_path(), b.as_slice())).collect();
        files.push((&manifest_path, &manifest));

        let mut staged = Vec::with_capacity(files.len());
        for (path, bytes) in &files {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(*path, e))?;
            tmp.write_all(bytes).map_err(|e| Error::io(*path, e))?;
            tmp.as_file().sync_all().map_err(|e| Error::io(*path, e))?;
            staged.push((tmp, *path));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, path) in staged {
            tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
            written.push(path.to_path_buf());
        }
        Ok(written)
    }
}

/// `SOURCE_DATE_EPOCH` when set, else the wall clock.
fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse().ok()) {
        return t;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
