use std::path::{Path, PathBuf};

use cyclic_shift::io::{sha256_file, write_json, InputDigest, TOOL_VERSION};
use serde::Serialize;

use crate::Failure;

/// Everything needed to repeat a run: the resolved flags, the exact
/// command line, and digests of what went in and what came out.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub command_line: Vec<String>,
    pub flags: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: usize,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<InputDigest>,
}

impl RunManifest {
    pub fn new(subcommand: &str, command_line: &[String], flags: &impl Serialize, seed: Option<u64>, threads: usize) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            subcommand: subcommand.to_string(),
            command_line: command_line.to_vec(),
            flags: serde_json::to_value(flags).expect("flags serialize"),
            seed,
            threads,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), Failure> {
        self.inputs.push(digest(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), Failure> {
        self.outputs.push(digest(path).map_err(|f| Failure::output(f.message))?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        write_json(path, self).map_err(Failure::output)
    }
}

fn digest(path: &Path) -> Result<InputDigest, Failure> {
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: sha256_file(path)?,
    })
}

/// `<file>.manifest.json` for commands whose output is a single file.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}
