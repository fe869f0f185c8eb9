//! Input hashing for the provenance chain.
//!
//! Each command records the content hash of every file it read, so an
//! output directory pins down exactly which artifacts produced it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::errors::{CliError, Result};

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Provenance {
    pub command: &'static str,
    pub inputs: Vec<InputRecord>,
}

impl Provenance {
    pub fn new(command: &'static str) -> Self {
        Provenance { command, inputs: Vec::new() }
    }

    /// Hashes a file this command consumed, in read order.
    pub fn record(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| CliError::io_at(path, e))?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        self.inputs.push(InputRecord { path: path.to_path_buf(), sha256: hex });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        crate::formats::write_json(&dir.join("provenance.json"), self)
    }
}
