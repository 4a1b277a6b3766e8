use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Bad input the user can fix: reported with exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: serde_json::Value,
    pub seed: u64,
    /// SHA-256 of every input file, keyed by the path as given.
    pub input_digests: BTreeMap<String, String>,
    pub version: String,
    pub wall_time_secs: f64,
}

/// Reads inputs (recording their digests) and writes outputs.
pub struct Io {
    out: Option<PathBuf>,
    pub digests: BTreeMap<String, String>,
}

impl Io {
    pub fn new(out: Option<PathBuf>) -> Result<Self> {
        if let Some(dir) = &out {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(Self { out, digests: BTreeMap::new() })
    }

    pub fn has_out(&self) -> bool {
        self.out.is_some()
    }

    pub fn read_text(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        self.digests.insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        String::from_utf8(bytes).map_err(|_| usage(format!("{} is not UTF-8", path.display())))
    }

    /// Parses a JSON input; syntax and shape errors carry line and column.
    pub fn read_json<T: DeserializeOwned>(&mut self, path: &Path) -> Result<T> {
        let text = self.read_text(path)?;
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    /// Writes `name` into the output directory, or prints it when there is none.
    pub fn emit_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.emit_text(name, &(text + "\n"))
    }

    pub fn emit_text(&self, name: &str, text: &str) -> Result<()> {
        match &self.out {
            Some(dir) => {
                let p = dir.join(name);
                fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
            }
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    /// Like [`Io::emit_json`], but only when an output directory was given.
    pub fn emit_json_if_out<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        if self.has_out() {
            self.emit_json(name, value)?;
        }
        Ok(())
    }

    pub fn write_manifest(&self, m: &RunManifest) -> Result<()> {
        let text = serde_json::to_string_pretty(m)? + "\n";
        match &self.out {
            Some(dir) => fs::write(dir.join("manifest.json"), text).context("writing manifest.json"),
            None => {
                eprint!("{text}");
                Ok(())
            }
        }
    }
}

pub fn seconds(d: Duration) -> f64 {
    d.as_secs_f64()
}
