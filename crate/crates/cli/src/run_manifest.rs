//! Run manifests: every command records what it ran, with which seed and
//! config, over which inputs (content-hashed), producing which outputs.
//! Rerunning with the same seed and inputs reproduces everything except the
//! timestamp line.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use sha2::{Digest, Sha256};

pub struct RunManifest {
    command: String,
    seed: Option<u64>,
    config: Vec<(String, String)>,
    inputs: Vec<(String, String)>,
    outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>) -> Self {
        RunManifest {
            command: command.into(),
            seed: None,
            config: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn config(mut self, kv: Vec<(String, String)>) -> Self {
        self.config = kv;
        self
    }

    pub fn arg(mut self, key: &str, value: impl std::fmt::Display) -> Self {
        self.config.push((key.to_string(), value.to_string()));
        self
    }

    /// Fingerprints a file's contents.
    pub fn input_file(mut self, label: &str, path: &Path) -> anyhow::Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("fingerprinting {}", path.display()))?;
        let mut h = Sha256::new();
        h.update(&bytes);
        self.inputs.push((
            format!("{label} {}", path.display()),
            format!("sha256:{:x}", h.finalize()),
        ));
        Ok(self)
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.to_path_buf());
        self
    }

    /// Writes `run_manifest.txt` beside the command outputs.
    pub fn write(self, dir: &Path) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let epoch = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
        let mut text = String::new();
        text.push_str(&format!("command: {}\n", self.command));
        text.push_str(&format!("timestamp: {}\n", epoch.as_secs()));
        if let Some(seed) = self.seed {
            text.push_str(&format!("seed: {seed}\n"));
        }
        if !self.config.is_empty() {
            text.push_str("config:\n");
            for (k, v) in &self.config {
                text.push_str(&format!("  {k} {v}\n"));
            }
        }
        if !self.inputs.is_empty() {
            text.push_str("inputs:\n");
            for (k, v) in &self.inputs {
                text.push_str(&format!("  {k} {v}\n"));
            }
        }
        if !self.outputs.is_empty() {
            text.push_str("outputs:\n");
            for p in &self.outputs {
                text.push_str(&format!("  {}\n", p.display()));
            }
        }
        let path = dir.join("run_manifest.txt");
        std::fs::write(&path, text)?;
        Ok(path)
    }
}
