use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::io;

use super::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

impl Artifact {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.display().to_string(),
            sha256: io::sha256_file(path)?,
        })
    }
}

/// Record of one command: what it read, what it wrote, and with which settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_owned(),
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(mut self, path: &Path) -> Result<Self> {
        self.inputs.push(Artifact::of(path)?);
        Ok(self)
    }

    pub fn output(mut self, path: &Path) -> Result<Self> {
        self.outputs.push(Artifact::of(path)?);
        Ok(self)
    }

    /// Manifest path for a primary output: `<output>.manifest.json`.
    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        output.with_file_name(name)
    }

    /// Write next to `primary` and return the manifest's path.
    pub fn write_beside(&self, primary: &Path) -> Result<PathBuf> {
        let path = Self::path_for(primary);
        let json = serde_json::to_string_pretty(self).expect("manifest serialises");
        io::write_atomic(&path, json.as_bytes())?;
        Ok(path)
    }
}
