//! Number formatting and atomic CSV/JSON output.

use anyhow::Result;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

/// Six significant digits in scientific notation.
pub fn sci(x: f64) -> String {
    format!("{x:.5e}")
}

pub fn sci_opt(x: Option<f64>) -> String {
    x.map(sci).unwrap_or_default()
}

/// First 16 hex digits of the SHA-256 of a settings dump.
pub fn config_hash(settings: &str) -> String {
    Sha256::digest(settings.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub struct Table {
    comment: Option<String>,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { comment: None, header: header.to_vec(), rows: Vec::new() }
    }

    /// A leading `# ...` line.
    pub fn with_comment(mut self, c: String) -> Self {
        self.comment = Some(c);
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        if let Some(c) = &self.comment {
            writeln!(buf, "# {c}")?;
        }
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
    }

    /// Atomically to `path`, or to stdout without one.
    pub fn emit(&self, path: Option<&Path>) -> Result<()> {
        emit_bytes(&self.to_bytes()?, path)
    }
}

pub fn emit_bytes(bytes: &[u8], path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fracprony::optimizer::write_atomic(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}
