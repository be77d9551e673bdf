//! Artifact writers. Every file lands in one run directory and is hashed into
//! `manifest.json` so a re-run can be checked byte for byte.

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use prodform::diagnostics::Ecdf;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "manifest.json";

/// A CSV column and the sentence documenting it in the schema row.
pub type Column = (&'static str, &'static str);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub versions: BTreeMap<String, String>,
    /// sha256 of every artifact, keyed by file name.
    pub files: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub struct RunDir {
    root: PathBuf,
    files: BTreeMap<String, String>,
}

impl RunDir {
    /// Creates `root`. An existing non-empty directory is a collision unless
    /// `force` is set, in which case its contents are replaced.
    pub fn create(root: &Path, force: bool) -> Result<RunDir> {
        if root.exists() {
            let occupied = !root.is_dir() || fs::read_dir(root)?.next().is_some();
            if occupied && !force {
                return Err(CliError::Config(format!(
                    "output directory {} already exists; pass --force to overwrite",
                    root.display()
                )));
            }
            if occupied {
                if root.is_dir() {
                    fs::remove_dir_all(root)?;
                } else {
                    fs::remove_file(root)?;
                }
            }
        }
        fs::create_dir_all(root)?;
        Ok(RunDir { root: root.to_path_buf(), files: BTreeMap::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.root.join(name), bytes)?;
        self.files.insert(name.to_string(), hex_sha256(bytes));
        Ok(())
    }

    /// CSV whose first line is `# schema: col=description; ...`.
    pub fn csv(&mut self, name: &str, columns: &[Column], rows: &[Vec<String>]) -> Result<()> {
        let mut buf = Vec::new();
        let schema: Vec<String> = columns.iter().map(|(c, d)| format!("{c}={d}")).collect();
        writeln!(buf, "# schema: {}", schema.join("; "))?;
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(columns.iter().map(|(c, _)| *c))?;
            for row in rows {
                if row.len() != columns.len() {
                    return Err(CliError::Io(std::io::Error::other(format!(
                        "{name}: row has {} fields for {} columns",
                        row.len(),
                        columns.len()
                    ))));
                }
                w.write_record(row)?;
            }
            w.flush()?;
        }
        self.put(name, &buf)
    }

    /// One JSON object per line.
    pub fn ndjson<T: Serialize>(&mut self, name: &str, records: &[T]) -> Result<()> {
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r)?;
            buf.push(b'\n');
        }
        self.put(name, &buf)
    }

    /// `x F(x)` pairs, one atom per line.
    pub fn ecdf(&mut self, name: &str, f: &Ecdf) -> Result<()> {
        self.pairs(name, f.points())
    }

    pub fn pairs(&mut self, name: &str, pts: impl Iterator<Item = (f64, f64)>) -> Result<()> {
        let mut buf = Vec::new();
        for (x, p) in pts {
            writeln!(buf, "{} {}", num(x), num(p))?;
        }
        self.put(name, &buf)
    }

    pub fn finish(self, config: &ExperimentConfig, elapsed_seconds: Option<f64>) -> Result<Manifest> {
        let manifest = Manifest {
            config: config.clone(),
            versions: BTreeMap::from([
                ("prodform".to_string(), prodform::VERSION.to_string()),
                ("prodform-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ]),
            files: self.files,
            elapsed_seconds,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.root.join(MANIFEST), text)?;
        Ok(manifest)
    }
}

fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
