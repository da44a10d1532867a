//! Report files. Every file is written to a temporary sibling and renamed
//! into place, so a failed command never leaves a partial output behind.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

pub struct OutDir {
    root: PathBuf,
    pending: Vec<(PathBuf, Vec<u8>)>,
}

impl OutDir {
    pub fn new(root: PathBuf) -> Self {
        OutDir { root, pending: Vec::new() }
    }

    pub fn add(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.pending.push((self.root.join(name), contents.into()));
    }

    /// Adds a JSON report. Only the `metadata` member varies between runs.
    pub fn add_report(&mut self, name: &str, command: &str, parameters: Value, result: impl Serialize) -> Result<(), CliError> {
        let result = serde_json::to_value(result).map_err(|e| CliError::Numeric(e.to_string()))?;
        let doc = json!({
            "command": command,
            "parameters": parameters,
            "result": result,
            "metadata": {
                "generated_unix_ms": SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64),
                "tool_version": env!("CARGO_PKG_VERSION"),
            },
        });
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Numeric(e.to_string()))?;
        text.push('\n');
        self.add(name, text);
        Ok(())
    }

    pub fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(&self.root)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", self.root.display())))?;
        let mut written = Vec::new();
        for (path, bytes) in self.pending {
            write_atomic(&path, &bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn csv_line<I: IntoIterator<Item = String>>(cells: I) -> String {
    let mut line = cells.into_iter().collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}
