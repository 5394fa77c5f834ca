//! Run manifests: enough metadata next to every artifact to regenerate it.

use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    /// Resolved configuration after merging config file and flags.
    pub config: serde_json::Value,
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: serde_json::Value, seed: u64) -> Self {
        Self {
            tool: "inversion",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.into(),
            config,
            seed,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Write `<primary output stem>.manifest.json` beside the first output.
    pub fn write(&self) -> anyhow::Result<Option<PathBuf>> {
        let Some(primary) = self.outputs.first() else {
            return Ok(None);
        };
        let mut path = primary.clone();
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        path.set_file_name(format!("{stem}.manifest.json"));
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(Some(path))
    }
}
