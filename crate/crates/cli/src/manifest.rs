use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;

/// Written next to the artifacts of every run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub started_at_unix_s: f64,
    pub elapsed_s: f64,
    pub summary: serde_json::Value,
}

/// Collects the artifacts of one command and writes its manifest.
pub struct Run {
    dir: PathBuf,
    command: String,
    seed: u64,
    config: serde_json::Value,
    outputs: Vec<String>,
    started: Instant,
    started_at: f64,
}

impl Run {
    pub fn start(dir: &Path, command: &str, seed: u64, config: impl Serialize) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let started_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            seed,
            config: serde_json::to_value(config)?,
            outputs: Vec::new(),
            started: Instant::now(),
            started_at,
        })
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> anyhow::Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(path)
    }

    pub fn finish(self, summary: impl Serialize) -> anyhow::Result<PathBuf> {
        let m = RunManifest {
            command: self.command.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            config: self.config,
            outputs: self.outputs,
            started_at_unix_s: self.started_at,
            elapsed_s: self.started.elapsed().as_secs_f64(),
            summary: serde_json::to_value(summary)?,
        };
        let path = self.dir.join(format!("{}.manifest.json", self.command));
        fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")?;
        Ok(path)
    }
}

/// CSV from a header and rows of numbers, using shortest round-trip
/// formatting so values re-parse exactly.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
