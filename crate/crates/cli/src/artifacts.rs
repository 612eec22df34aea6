use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, PipelineConfig};
use crate::error::CliError;
use crate::Command;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Written next to the artifacts; enough to rerun the command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool: String,
    pub command: Command,
    pub config_hash: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub artifacts: Vec<ArtifactEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(CliError::Config(format!(
                "{}: unsupported manifest version {}",
                path.display(),
                manifest.format_version
            )));
        }
        Ok(manifest)
    }
}

pub struct Artifacts {
    dir: PathBuf,
    entries: Vec<ArtifactEntry>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        log::info!("wrote {}", path.display());
        self.entries.push(ArtifactEntry {
            path: name.to_string(),
            bytes: bytes.len(),
            sha256: hex(&Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn write_jsonl<T: Serialize>(&mut self, name: &str, values: &[T]) -> Result<(), CliError> {
        let mut bytes = Vec::new();
        for v in values {
            serde_json::to_writer(&mut bytes, v)?;
            bytes.push(b'\n');
        }
        self.write(name, &bytes)
    }

    pub fn finish(self, command: &Command, config: &PipelineConfig) -> Result<(), CliError> {
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            tool: format!("gramforge {}", env!("CARGO_PKG_VERSION")),
            command: command.clone(),
            config_hash: config.hash(),
            seed: config.seed,
            config: config.clone(),
            artifacts: self.entries,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        let path = self.dir.join(MANIFEST);
        fs::write(&path, bytes)?;
        log::info!("wrote {}", path.display());
        Ok(())
    }
}
