use std::path::{Path, PathBuf};

use morale_core::hash::sha256_hex;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::invocation::Invocation;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

impl InputHash {
    pub fn of(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: path.to_path_buf(),
            sha256: sha256_hex(bytes),
        }
    }
}

/// Everything needed to rerun a command: the fully resolved invocation
/// (no environment or config-file lookups left), input hashes and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub invocation: Invocation,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<PathBuf>,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub started_unix_ms: u64,
    pub wall_clock_secs: f64,
}

impl RunManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::runtime(e.to_string()))?;
        std::fs::write(path, text + "\n")
            .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
    }

    /// Inputs whose current bytes no longer hash to the recorded value.
    pub fn changed_inputs(&self) -> Vec<PathBuf> {
        self.inputs
            .iter()
            .filter(|i| std::fs::read(&i.path).map_or(true, |b| sha256_hex(&b) != i.sha256))
            .map(|i| i.path.clone())
            .collect()
    }
}

/// `<dir>/manifest.json` for directory outputs, `<file>.manifest.json`
/// beside single-file outputs.
pub fn manifest_path(out: &Path, out_is_dir: bool) -> PathBuf {
    if out_is_dir {
        out.join(MANIFEST_NAME)
    } else {
        let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}
