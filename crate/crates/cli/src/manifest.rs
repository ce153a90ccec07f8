use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Versions {
    pub code: &'static str,
    pub schema: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub figures: Option<u32>,
}

/// Record of one completed run. It is written after every output, so its
/// presence means the run finished.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved configuration, defaults included.
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub versions: Versions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Settings chosen by this tool where the model leaves them open.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub artifact_choices: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(MANIFEST_FILE);
        let mut bytes =
            serde_json::to_vec_pretty(self).map_err(|e| CliError::io(MANIFEST_FILE, e))?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes).map_err(|e| CliError::io(path.display().to_string(), e))
    }
}
