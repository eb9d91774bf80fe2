//! Artifact writers, checksums, and the run manifest.
//!
//! Data files carry no wall-clock or machine-specific content: the same
//! table always serializes to the same bytes. The manifest is the one file
//! allowed to record when and by which build a run happened, and it is
//! written last through a temp-file rename so a crash never leaves a
//! directory that claims to be complete.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// On-disk encoding for tabular artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FileFormat {
    #[default]
    Csv,
    Json,
    Bin,
}

impl FileFormat {
    pub fn extension(self) -> &'static str {
        match self {
            FileFormat::Csv => "csv",
            FileFormat::Json => "json",
            FileFormat::Bin => "bin",
        }
    }
}

impl std::str::FromStr for FileFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(FileFormat::Csv),
            "json" => Ok(FileFormat::Json),
            "bin" => Ok(FileFormat::Bin),
            other => Err(Error::config(format!(
                "unknown format '{other}'; expected csv, json, or bin"
            ))),
        }
    }
}

/// A named numeric table destined for one artifact file.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        SeriesTable {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len(), "{}: ragged row", self.name);
        self.rows.push(row);
    }

    fn to_csv_bytes(&self) -> Vec<u8> {
        let mut text = self.columns.join(",");
        text.push('\n');
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    text.push(',');
                }
                write!(text, "{v}").expect("write to string");
                first = false;
            }
            text.push('\n');
        }
        text.into_bytes()
    }

    fn to_json_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("table serializes");
        bytes.push(b'\n');
        bytes
    }

    /// Little-endian `f64` values in row-major order; the shape lives in the
    /// JSON sidecar.
    fn to_bin_bytes(&self) -> Vec<u8> {
        let mut bytes = Vec::with_capacity(self.rows.len() * self.columns.len() * 8);
        for row in &self.rows {
            for v in row {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        bytes
    }

    fn sidecar_bytes(&self, data_file: &str) -> Vec<u8> {
        let sidecar = serde_json::json!({
            "name": self.name,
            "data_file": data_file,
            "columns": self.columns,
            "row_count": self.rows.len(),
            "encoding": "f64-le-row-major",
        });
        let mut bytes = serde_json::to_vec_pretty(&sidecar).expect("sidecar serializes");
        bytes.push(b'\n');
        bytes
    }
}

/// One emitted file as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        write!(hex, "{b:02x}").expect("write to string");
    }
    hex
}

/// Writes artifacts into one run directory and records their checksums.
pub(crate) struct Emitter {
    dir: PathBuf,
    artifacts: Vec<ArtifactRecord>,
}

impl Emitter {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Emitter { dir: dir.to_path_buf(), artifacts: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.artifacts.push(ArtifactRecord {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_table(&mut self, table: &SeriesTable, format: FileFormat) -> Result<()> {
        let file = format!("{}.{}", table.name, format.extension());
        match format {
            FileFormat::Csv => self.write(&file, &table.to_csv_bytes()),
            FileFormat::Json => self.write(&file, &table.to_json_bytes()),
            FileFormat::Bin => {
                self.write(&file, &table.to_bin_bytes())?;
                let sidecar = format!("{}.bin.json", table.name);
                self.write(&sidecar, &table.sidecar_bytes(&file))
            }
        }
    }

    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| Error::config(format!("cannot serialize {name}: {e}")))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn into_artifacts(self) -> Vec<ArtifactRecord> {
        self.artifacts
    }
}

/// Record of one completed (or aborted) run; always the last file written.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub name: String,
    /// Software version that produced the run.
    pub version: String,
    /// `"completed"` or `"aborted"`.
    pub status: String,
    /// Abort reason when `status` is `"aborted"`.
    #[serde(default)]
    pub abort: Option<String>,
    /// Seed recorded for provenance; shipped scenarios are deterministic
    /// without it.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Wall-clock creation time; lives only here, never in data files.
    pub created_unix_ms: u128,
    pub warnings: Vec<String>,
    /// Full echo of the scenario that ran.
    pub scenario: super::Scenario,
    pub artifacts: Vec<ArtifactRecord>,
}

impl RunManifest {
    /// Serialize and move into place through a temp file so readers never
    /// observe a partial manifest.
    pub(crate) fn write_atomic(&self, dir: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)
            .map_err(|e| Error::config(format!("cannot serialize manifest: {e}")))?;
        bytes.push(b'\n');
        let tmp = dir.join("manifest.json.tmp");
        std::fs::write(&tmp, &bytes)?;
        std::fs::rename(&tmp, dir.join("manifest.json"))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join("manifest.json"))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("cannot parse manifest: {e}")))
    }

    /// Recompute every artifact checksum against the files on disk.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for artifact in &self.artifacts {
            let bytes = std::fs::read(dir.join(&artifact.name))?;
            if bytes.len() as u64 != artifact.bytes {
                return Err(Error::config(format!(
                    "artifact {}: expected {} bytes, found {}",
                    artifact.name,
                    artifact.bytes,
                    bytes.len()
                )));
            }
            let actual = sha256_hex(&bytes);
            if actual != artifact.sha256 {
                return Err(Error::config(format!(
                    "artifact {}: checksum mismatch",
                    artifact.name
                )));
            }
        }
        Ok(())
    }
}
