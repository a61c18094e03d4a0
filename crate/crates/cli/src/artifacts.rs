//! Run outputs held in memory and written in one serialized pass, followed
//! by a manifest that lists every file with its content hash.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Header written next to every float64 raster.
#[derive(Debug, Clone, Serialize)]
pub struct RasterHeader {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    /// Always `"f64le"`, row-major with x varying fastest.
    pub dtype: &'static str,
}

impl RasterHeader {
    /// Square `n × n` raster with nodes `-X + i·2X/n`.
    pub fn square(n: usize, half_width: f64) -> Self {
        let dx = 2.0 * half_width / n as f64;
        RasterHeader {
            nx: n,
            ny: n,
            x0: -half_width,
            y0: -half_width,
            dx,
            dy: dx,
            dtype: "f64le",
        }
    }

    pub fn node(&self, q: usize) -> [f64; 2] {
        [self.x0 + (q % self.nx) as f64 * self.dx, self.y0 + (q / self.nx) as f64 * self.dy]
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
}

#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
        self.add(name, bytes);
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    /// `stem.f64` with the values and `stem.json` with the header.
    pub fn raster<H: Serialize>(&mut self, stem: &str, values: &[f64], header: &H) -> Result<(), CliError> {
        self.add(format!("{stem}.f64"), values.iter().flat_map(|v| v.to_le_bytes()).collect());
        self.json(&format!("{stem}.json"), header)
    }
}

/// Pass/fail outcome of one check inside a study.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!("[{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub cli: &'static str,
    pub library: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Inputs {
    /// Hash of the effective configuration as written to `config.toml`.
    pub config_sha256: String,
    pub profile_files: Vec<FileEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    /// `PASS`, `FAIL` or `ERROR`.
    pub status: &'static str,
    pub versions: Versions,
    pub inputs: Inputs,
    pub seed: u64,
    pub timings: Vec<Timing>,
    pub checks: Vec<Check>,
    /// Names of the failing checks.
    pub failing: Vec<String>,
    pub outputs: Vec<FileEntry>,
}

impl Manifest {
    pub fn status_for(checks: &[Check], errored: bool) -> &'static str {
        if errored {
            "ERROR"
        } else if checks.iter().all(|c| c.passed) {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

pub fn file_entry(path: &Path) -> Result<FileEntry, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(FileEntry {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len(),
    })
}

/// Writes every artifact under `dir`, then `manifest.json` listing them.
pub fn write_run(dir: &Path, artifacts: &Artifacts, mut manifest: Manifest) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    manifest.outputs.clear();
    for (name, bytes) in &artifacts.files {
        fs::write(dir.join(name), bytes)?;
        manifest.outputs.push(FileEntry {
            path: name.clone(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
    }
    let path = dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    fs::write(&path, bytes)?;
    Ok(path)
}
