use std::path::{Path, PathBuf};

use adaptive_ep::bench::HostInfo;
use adaptive_ep::io::write_atomic;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

impl FileDigest {
    fn of(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: path.to_path_buf(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        }
    }
}

/// Inputs read and outputs staged by one run. Outputs are written only by
/// [`Run::commit`], each through a temporary file and a rename, followed by
/// the manifest.
#[derive(Debug, Default)]
pub struct Run {
    inputs: Vec<FileDigest>,
    outputs: Vec<(PathBuf, Vec<u8>)>,
}

impl Run {
    /// Reads an input file, recording its digest. A missing file is a usage
    /// error.
    pub fn read(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        if !path.is_file() {
            return Err(CliError::Usage(format!("input `{}` does not exist", path.display())));
        }
        let bytes = std::fs::read(path)?;
        self.inputs.push(FileDigest::of(path, &bytes));
        Ok(bytes)
    }

    pub fn stage(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.outputs.push((path.into(), bytes));
    }

    pub fn commit(self, manifest_path: &Path, command: &str, config: &impl Serialize) -> CliResult {
        for (path, _) in &self.outputs {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for (path, bytes) in &self.outputs {
            outputs.push(FileDigest::of(path, bytes));
            write_atomic(path, bytes)?;
        }
        let manifest = Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            config: serde_json::to_value(config)?,
            host: HostInfo::current(),
            inputs: self.inputs,
            outputs,
        };
        let mut text = serde_json::to_vec_pretty(&manifest)?;
        text.push(b'\n');
        write_atomic(manifest_path, &text)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    tool_version: &'a str,
    command: &'a str,
    config: serde_json::Value,
    host: HostInfo,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

/// `<path>.manifest.json`.
pub fn beside(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Joins a prefix that is either a directory (ending in a separator) or a
/// file-name stem.
pub fn prefixed(prefix: &str, name: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}{name}"))
}
