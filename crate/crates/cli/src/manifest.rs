//! Provenance manifest written next to generated artifacts: the exact
//! configuration, a digest of every input file, and the list of outputs.
//! Nothing time-dependent goes in, so reruns are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, io_input};

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Flag values as given, keyed by flag name.
    pub config: BTreeMap<String, String>,
    /// SHA-256 of each input file, keyed by path as given.
    pub inputs: BTreeMap<String, String>,
    /// File names written alongside this manifest (or the single artifact
    /// this manifest sits next to).
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &'static str, seed: Option<u64>) -> Manifest {
        Manifest {
            tool: "udstep",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self, CliError> {
        let digest = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(self)
    }

    pub fn output(&mut self, name: impl Into<String>) -> &mut Self {
        self.outputs.push(name.into());
        self
    }

    /// Serializes to `<dir>/manifest.json` when the command fills a
    /// directory, or `<artifact>.manifest.json` next to a single file.
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Input(format!("manifest: {e}")))?;
        fs::write(path, body + "\n").map_err(|e| io_input(path, e))
    }
}

pub fn manifest_path_for_file(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut reader =
        BufReader::new(fs::File::open(path).map_err(|e| io_input(path, e))?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader.read(&mut buf).map_err(|e| io_input(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().fold(String::new(), |mut s, b| {
        s.push_str(&format!("{b:02x}"));
        s
    }))
}
