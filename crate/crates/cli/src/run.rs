//! Output directory bookkeeping: hashed headers on every file and the run
//! manifest.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// An input path that does not exist. Reported with exit status 2.
#[derive(Debug)]
pub struct MissingInput(pub PathBuf);

impl fmt::Display for MissingInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "input file not found: {}", self.0.display())
    }
}

impl std::error::Error for MissingInput {}

/// Reads an input document, distinguishing a missing file from other I/O
/// failures.
pub fn read_input(path: &Path) -> Result<String> {
    if !path.is_file() {
        return Err(MissingInput(path.to_path_buf()).into());
    }
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    arguments: Vec<String>,
    config_hash: &'a str,
    seed: Option<u64>,
    inputs: Vec<String>,
    outputs: &'a [String],
    wall_clock_seconds: f64,
}

/// One command invocation writing into one output directory.
pub struct Run {
    out: PathBuf,
    command: String,
    hash: String,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
    started: Instant,
}

impl Run {
    /// `inputs` are hashed in order into the config hash.
    pub fn start(command: &str, out: &Path, inputs: &[(&Path, &str)], seed: Option<u64>) -> Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let mut hasher = Sha256::new();
        for (_, text) in inputs {
            hasher.update(text.as_bytes());
        }
        Ok(Run {
            out: out.to_path_buf(),
            command: command.to_string(),
            hash: hex::encode(hasher.finalize()),
            seed,
            inputs: inputs.iter().map(|(p, _)| p.to_path_buf()).collect(),
            outputs: Vec::new(),
            started: Instant::now(),
        })
    }

    fn header(&self) -> String {
        match self.seed {
            Some(s) => format!("# config_hash={}, seed={s}\n", self.hash),
            None => format!("# config_hash={}\n", self.hash),
        }
    }

    /// Writes `body` to `relative` under the output directory, preceded by a
    /// `# config_hash=…` comment line. Works for CSV and TOML alike.
    pub fn write(&mut self, relative: &str, body: &str) -> Result<PathBuf> {
        let path = self.out.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        let mut text = self.header();
        text.push_str(body);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(relative.to_string());
        Ok(path)
    }

    /// Writes `manifest.toml` listing every output of the run.
    pub fn finish(self) -> Result<()> {
        let manifest = Manifest {
            tool: env!("CARGO_BIN_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            arguments: std::env::args().skip(1).collect(),
            config_hash: &self.hash,
            seed: self.seed,
            inputs: self.inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs: &self.outputs,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = self.out.join("manifest.toml");
        fs::write(&path, toml::to_string(&manifest)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
