//! Per-stage run manifests: what went in, what came out, and how.

use std::path::{Path, PathBuf};

use pstates::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileHash {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub stage: &'a str,
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: &'a C,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Inputs are recorded by file name only so manifests do not depend on
/// where the run happened. Outputs are recorded relative to `out`.
fn hashes(files: &[PathBuf], base: Option<&Path>) -> Result<Vec<FileHash>> {
    files
        .iter()
        .map(|f| {
            let name = match base.and_then(|b| f.strip_prefix(b).ok()) {
                Some(rel) => rel.to_string_lossy().replace('\\', "/"),
                None => f
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            };
            Ok(FileHash {
                file: name,
                sha256: sha256_file(f)?,
            })
        })
        .collect()
}

pub fn manifest_path(out: &Path, stage: &str) -> PathBuf {
    out.join(format!("{stage}.manifest.json"))
}

pub fn write_manifest<C: Serialize>(
    out: &Path,
    stage: &str,
    seed: u64,
    config: &C,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
) -> Result<PathBuf> {
    let manifest = Manifest {
        stage,
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config,
        inputs: hashes(inputs, None)?,
        outputs: hashes(outputs, Some(out))?,
    };
    let path = manifest_path(out, stage);
    pstates::io::write_json(&path, &manifest)?;
    Ok(path)
}
