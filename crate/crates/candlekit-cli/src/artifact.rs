//! Artifact writing: every emitted file starts with a metadata header
//! carrying the tool version, the seed and a digest of the effective
//! configuration, so identical configs produce byte-identical artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::TOOL_VERSION;

/// Digest of the effective settings of one command invocation, computed
/// over canonical `key=value` lines.
pub fn config_digest(command: &str, parts: &[(&str, String)]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(command.as_bytes());
    hasher.update(b"\n");
    for (k, v) in parts {
        hasher.update(k.as_bytes());
        hasher.update(b"=");
        hasher.update(v.as_bytes());
        hasher.update(b"\n");
    }
    let hex: String = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    hex[..16].to_string()
}

/// Output-directory handle stamping the shared metadata header.
#[derive(Clone, Debug)]
pub struct Artifacts {
    out: PathBuf,
    seed: u64,
    digest: String,
}

impl Artifacts {
    pub fn new(out: &Path, seed: u64, digest: String) -> Result<Self, CliError> {
        std::fs::create_dir_all(out)
            .map_err(|e| CliError::data(format!("cannot create {}: {e}", out.display())))?;
        Ok(Self {
            out: out.to_path_buf(),
            seed,
            digest,
        })
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn header_lines(&self, extra: &[(&str, String)]) -> String {
        let mut h = format!(
            "# {TOOL_VERSION}\n# seed: {}\n# config: {}\n",
            self.seed, self.digest
        );
        for (k, v) in extra {
            h.push_str(&format!("# {k}: {v}\n"));
        }
        h
    }

    /// Open a CSV artifact with the metadata header already written.
    pub fn create_csv(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        self.create_csv_with(name, &[])
    }

    pub fn create_csv_with(
        &self,
        name: &str,
        extra: &[(&str, String)],
    ) -> Result<BufWriter<File>, CliError> {
        let path = self.path(name);
        let file = File::create(&path)
            .map_err(|e| CliError::data(format!("cannot create {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.header_lines(extra).as_bytes())?;
        Ok(w)
    }

    /// Write an SVG artifact; the metadata header rides in an XML comment.
    pub fn write_svg(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let meta = format!(
            "<!-- {TOOL_VERSION} seed={} config={} -->\n",
            self.seed, self.digest
        );
        std::fs::write(&path, format!("{meta}{body}"))?;
        Ok(path)
    }

    /// Write a plain text artifact with the `#` metadata header.
    pub fn write_text(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        std::fs::write(&path, format!("{}{body}", self.header_lines(&[])))?;
        Ok(path)
    }
}

/// Consistent float formatting for CSV cells: shortest round-trip form.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

/// Lowercase file-name slug for a pattern name.
pub fn slug(name: &str) -> String {
    name.chars()
        .map(|c| match c {
            '+' => 'p',
            '-' => 'm',
            c if c.is_ascii_alphanumeric() => c.to_ascii_lowercase(),
            _ => '-',
        })
        .collect::<String>()
        .trim_matches('-')
        .to_string()
}
