use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

/// Everything needed to reproduce one command's outputs.
///
/// Output paths are recorded relative to the manifest's directory so that
/// identical runs into different directories produce identical manifests.
/// Thread counts are deliberately absent: outputs do not depend on them.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub inputs: BTreeMap<String, String>,
    pub config: BTreeMap<String, serde_json::Value>,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: BTreeMap::new(),
            config: BTreeMap::new(),
            seed: None,
            outputs: Vec::new(),
        }
    }

    pub fn input(mut self, name: &str, path: &Path) -> Self {
        self.inputs.insert(name.to_string(), path.display().to_string());
        self
    }

    pub fn config(mut self, name: &str, value: impl Serialize) -> Self {
        let value = serde_json::to_value(value).expect("config values serialise");
        self.config.insert(name.to_string(), value);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        let name = path.file_name().map_or_else(
            || path.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        self.outputs.push(name);
        self
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)
    }
}
