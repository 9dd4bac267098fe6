use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const RUN_FORMAT: &str = "rfod-run";
pub const RUN_VERSION: u32 = 1;
pub const FILE_NAME: &str = "run_manifest.json";

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one command invocation, written as `run_manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub format: &'static str,
    pub version: u32,
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
    pub timings: BTreeMap<String, serde_json::Value>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: impl Serialize,
        seed: Option<u64>,
        threads: Option<usize>,
    ) -> Result<Self, CliError> {
        Ok(Self {
            format: RUN_FORMAT,
            version: RUN_VERSION,
            command: command.into(),
            args: std::env::args().skip(1).collect(),
            config: serde_json::to_value(config).map_err(rfod::Error::from)?,
            seed,
            threads,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            extra: BTreeMap::new(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let sha256 = if path.is_dir() {
            digest_dir(path)?
        } else {
            digest_file(path)?
        };
        self.inputs.push(InputDigest {
            path: path.to_path_buf(),
            sha256,
        });
        Ok(())
    }

    pub fn timing(&mut self, key: &str, value: impl Serialize) {
        self.timings.insert(
            key.into(),
            serde_json::to_value(value).unwrap_or(serde_json::Value::Null),
        );
    }

    pub fn write(mut self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(FILE_NAME);
        self.outputs.push(path.clone());
        let text = serde_json::to_string_pretty(&self).map_err(rfod::Error::from)?;
        write(&path, text.as_bytes())
    }
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn digest_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Digest over the sorted file names and contents of a directory (one level),
/// skipping any run manifest it holds.
pub fn digest_dir(dir: &Path) -> Result<String, CliError> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().is_some_and(|n| n != FILE_NAME))
        .collect();
    names.sort();
    let mut hasher = Sha256::new();
    for p in names {
        let bytes = fs::read(&p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
        hasher.update(p.file_name().unwrap_or_default().as_encoded_bytes());
        hasher.update([0]);
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}
