//! Provenance header and file writers shared by all commands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{at, Result};

pub const TOOL: &str = "herald";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Embedded in every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_sha256: String,
    pub seed: Option<u64>,
    /// Hash of the analysed tag file, `analyze` only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_sha256: Option<String>,
}

impl Meta {
    pub fn new(command: &'static str, config_text: &str, seed: Option<u64>) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            command,
            config_sha256: sha256_hex(config_text.as_bytes()),
            seed,
            input_sha256: None,
        }
    }

    /// `key: value` lines for CSV comment headers.
    pub fn comments(&self) -> Vec<String> {
        let mut out = vec![
            format!("tool: {} {}", self.tool, self.version),
            format!("command: {}", self.command),
            format!("config_sha256: {}", self.config_sha256),
            match self.seed {
                Some(s) => format!("seed: {s}"),
                None => "seed: none".to_string(),
            },
        ];
        if let Some(h) = &self.input_sha256 {
            out.push(format!("input_sha256: {h}"));
        }
        out
    }
}

/// JSON document with the provenance block first.
#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    meta: &'a Meta,
    #[serde(flatten)]
    body: &'a T,
}

pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(at(root))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn json<T: Serialize>(&mut self, name: &str, meta: &Meta, body: &T) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(&Document { meta, body })?;
        text.push('\n');
        fs::write(&path, text).map_err(at(&path))?;
        self.written.push(path);
        Ok(())
    }

    /// Writes a CSV with the provenance as `# ` comment lines, then `header`
    /// and `rows`.
    pub fn csv(
        &mut self,
        name: &str,
        meta: &Meta,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<()> {
        self.with_writer(name, |w| {
            for c in meta.comments() {
                writeln!(w, "# {c}")?;
            }
            writeln!(w, "{}", header.join(","))?;
            for r in rows {
                writeln!(w, "{}", r.join(","))?;
            }
            Ok(())
        })
    }

    pub fn with_writer<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.path(name);
        let file = File::create(&path).map_err(at(&path))?;
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).map_err(at(&path))?;
        self.written.push(path);
        Ok(())
    }
}

/// Formats an optional number, empty when absent.
pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Window label used in file and column names, e.g. `1100ps`.
pub fn window_label(window: f64) -> String {
    format!("{}ps", (window * 1e12).round() as i64)
}
