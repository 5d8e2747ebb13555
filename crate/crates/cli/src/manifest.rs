use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Written beside every command's outputs. Holds nothing time- or
/// host-dependent, so identical invocations give identical bytes.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub tool_version: String,
    pub args: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, out: &Path) -> Self {
        RunManifest {
            command: command.to_string(),
            config: None,
            corpus: None,
            seed: None,
            out: out.to_path_buf(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            args: Vec::new(),
        }
    }

    pub fn write(&self) -> std::io::Result<()> {
        fs::create_dir_all(&self.out)?;
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(self.out.join(MANIFEST_FILE), text)
    }
}
