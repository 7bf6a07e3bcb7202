//! Output directory handling and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::Failure;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

/// Collects the files of one run; the manifest goes last. `start` is when
/// the run began, for the wall time.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
    start: Instant,
}

impl OutDir {
    pub fn open(root: &Path, start: Instant) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Failure::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
            start,
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.root.join(name), bytes)?;
        log::info!("wrote {}", self.root.join(name).display());
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).context("serializing output")?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Records a file some other writer already put under the root.
    pub fn adopt(&mut self, name: &str) {
        self.written.push(name.to_string());
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn finish(self, subcommand: &str, config: serde_json::Value) -> Result<()> {
        let manifest = RunManifest {
            tool: "homog",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            config,
            outputs: self.written,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest).context("serializing manifest")?;
        write_atomic(&self.root.join(MANIFEST), text.as_bytes())
    }
}

/// Removes a manifest left by an earlier run, so a failed run never leaves
/// one behind.
pub fn clear_manifest(root: &Path) -> Result<()> {
    let stale = root.join(MANIFEST);
    if stale.exists() {
        fs::remove_file(&stale).map_err(|e| Failure::io(&stale, e))?;
    }
    Ok(())
}

/// Writes through a temporary file in the same directory and renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Failure::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Failure::io(path, e))?;
    tmp.persist(path).map_err(|e| Failure::io(path, e.error))?;
    Ok(())
}

/// CSV text from a header and rows of numbers.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        // Debug formatting is the shortest text that parses back exactly.
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}
