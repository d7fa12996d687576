//! `run.json`: the resolved command plus content hashes of everything the
//! run read and wrote.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tpca::{Error, Result};

use crate::args::Command;

pub const MANIFEST_NAME: &str = "run.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub command: Command,
    pub backend: Option<String>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("{} is not a run manifest: {e}", path.display())))
    }
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Tracks the files a command touches.
#[derive(Debug, Default)]
pub struct Run {
    pub backend: Option<String>,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl Run {
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.insert(path.display().to_string(), sha256(&bytes));
        Ok(bytes)
    }

    pub fn read_string(&mut self, path: &Path) -> Result<String> {
        let bytes = self.read(path)?;
        String::from_utf8(bytes).map_err(|e| Error::MalformedLine {
            line: 0,
            reason: format!("{} is not UTF-8: {e}", path.display()),
        })
    }

    /// Hashes a file that was read through some other loader.
    pub fn note_input(&mut self, path: &Path) -> Result<()> {
        self.read(path).map(drop)
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        self.outputs.insert(path.display().to_string(), sha256(bytes));
        Ok(())
    }

    /// Hashes a file that was written through some other writer.
    pub fn note_output(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        self.outputs.insert(path.display().to_string(), sha256(&bytes));
        Ok(())
    }

    pub fn finish(self, command: Command, dir: &Path) -> Result<PathBuf> {
        let manifest = Manifest {
            tool: format!("tpca {}", env!("CARGO_PKG_VERSION")),
            command,
            backend: self.backend,
            inputs: self.inputs,
            outputs: self.outputs,
        };
        let path = dir.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
