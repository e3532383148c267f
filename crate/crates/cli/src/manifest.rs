use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sparsedag::io::sha256_hex;
use sparsedag::simulate::RNG_ALGORITHM;
use sparsedag::Result;

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: Option<u64>,
    pub config_hash: String,
    pub rng: &'static str,
    pub outputs: Vec<String>,
}

impl<'a> Manifest<'a> {
    /// `config_hash` is the SHA-256 of the JSON serialization of `config`.
    pub fn new<C: Serialize>(command: &'a str, seed: Option<u64>, config: &C) -> Result<Self> {
        Ok(Self::with_hash(
            command,
            seed,
            sha256_hex(&serde_json::to_vec(config)?),
        ))
    }

    pub fn with_hash(command: &'a str, seed: Option<u64>, config_hash: String) -> Self {
        Manifest {
            tool: "sparsedag",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config_hash,
            rng: RNG_ALGORITHM,
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, to_pretty(self)?)?;
        Ok(())
    }
}

pub fn to_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// `<file>.manifest.json` next to a single output file.
pub fn beside(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

pub fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}
