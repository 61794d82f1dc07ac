//! Deterministic artifact output: 17-significant-digit floats, RFC-4180
//! style CSV, and a manifest with a content hash per file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use sha2::{Digest, Sha256};

/// Render a float with 17 significant digits so a reader can reproduce the
/// exact bit pattern.
pub fn fl(v: f64) -> String {
    format!("{v:.16e}")
}

/// Lowercase hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Builds CSV text in memory with CRLF records per RFC 4180.
pub struct CsvBuilder {
    text: String,
}

impl CsvBuilder {
    /// Start a CSV with the given header row.
    pub fn new(header: &[&str]) -> Self {
        let mut b = CsvBuilder { text: String::new() };
        b.raw_row(header);
        b
    }

    /// Append a row of preformatted fields.
    pub fn raw_row(&mut self, fields: &[&str]) {
        self.text.push_str(&fields.join(","));
        self.text.push_str("\r\n");
    }

    /// Append a row of owned fields.
    pub fn row(&mut self, fields: &[String]) {
        let refs: Vec<&str> = fields.iter().map(String::as_str).collect();
        self.raw_row(&refs);
    }

    /// Finish and take the CSV text.
    pub fn finish(self) -> String {
        self.text
    }
}

/// Writes artifacts into a directory and accumulates the manifest.
pub struct ArtifactWriter {
    dir: PathBuf,
    entries: Vec<(String, String)>,
}

impl ArtifactWriter {
    /// Create the output directory (if needed) and an empty manifest.
    pub fn new(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(ArtifactWriter { dir: dir.to_path_buf(), entries: Vec::new() })
    }

    /// Write one artifact and record its hash.
    pub fn write(&mut self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .with_context(|| format!("writing {}", path.display()))?;
        self.entries.push((name.to_string(), sha256_hex(contents.as_bytes())));
        Ok(path)
    }

    /// Write `manifest.txt` recording the config hash, seed, versions, and
    /// one content hash per artifact, then return the manifest path.
    pub fn finish(self, config_hash: &str, seed: u64) -> anyhow::Result<PathBuf> {
        let mut out = String::new();
        out.push_str("nsfde run manifest\n");
        out.push_str(&format!("config_sha256: {config_hash}\n"));
        out.push_str(&format!("seed: {seed}\n"));
        out.push_str(&format!("nsfde_version: {}\n", env!("CARGO_PKG_VERSION")));
        for (name, hash) in &self.entries {
            out.push_str(&format!("file: {name} sha256: {hash}\n"));
        }
        let path = self.dir.join("manifest.txt");
        std::fs::write(&path, &out)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
