//! JSON run reports and output files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::failure::Failure;

pub const TOOL: &str = "spreadwave";

/// Report envelope shared by all commands. Struct fields serialize in
/// declaration order and maps are sorted, so the key order is stable.
#[derive(Serialize)]
pub struct Report<'a, C: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: &'a C,
    /// SHA-256 of each input file, keyed by the path as given.
    pub inputs: &'a BTreeMap<String, String>,
    pub units: BTreeMap<&'static str, &'static str>,
    pub result: &'a R,
}

impl<'a, C: Serialize, R: Serialize> Report<'a, C, R> {
    pub fn new(command: &'static str, config: &'a C, inputs: &'a BTreeMap<String, String>, result: &'a R) -> Self {
        Self {
            tool: TOOL,
            version: spreadwave_core::VERSION,
            command,
            config,
            inputs,
            units: BTreeMap::new(),
            result,
        }
    }

    pub fn unit(mut self, key: &'static str, unit: &'static str) -> Self {
        self.units.insert(key, unit);
        self
    }

    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        writeln!(w)
            .and_then(|_| w.flush())
            .map_err(|e| Failure::io(format!("{}: {e}", path.display())))
    }
}

/// Reads a whole input file and records its digest.
pub fn read_input(path: &Path, inputs: &mut BTreeMap<String, String>) -> Result<Vec<u8>, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    inputs.insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
    Ok(bytes)
}

pub fn ensure_out_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::io(format!("cannot create output directory {}: {e}", dir.display())))
}

pub fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

/// Writes one output file with `write`, mapping errors to exit codes.
pub fn write_file<F>(path: &Path, write: F) -> Result<(), Failure>
where
    F: FnOnce(&mut BufWriter<File>) -> spreadwave_core::Result<()>,
{
    let mut w = create(path)?;
    write(&mut w).map_err(|e| Failure::from(e).context(path.display()))?;
    w.flush().map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
