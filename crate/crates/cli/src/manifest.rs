use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;

pub const MANIFEST_FORMAT: &str = "patchwood-manifest";
pub const MANIFEST_VERSION: u32 = 1;

/// Everything needed to rerun a command: the argument vector, the resolved
/// configuration and the files it touched.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub format: &'static str,
    pub version: u32,
    pub subcommand: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub library_version: &'static str,
    pub wall_clock_seconds: f64,
}

pub struct Run {
    pub subcommand: &'static str,
    pub seed: u64,
    pub started: Instant,
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl Run {
    pub fn new(subcommand: &'static str, seed: u64, config: &impl Serialize) -> anyhow::Result<Self> {
        Ok(Self {
            subcommand,
            seed,
            started: Instant::now(),
            config: serde_json::to_value(config)?,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Writes the manifest to `explicit`, or next to the first output file.
    pub fn finish(self, explicit: Option<&Path>) -> anyhow::Result<()> {
        let path = match (explicit, self.outputs.first()) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(out)) => {
                let mut name = out.as_os_str().to_owned();
                name.push(".manifest.json");
                PathBuf::from(name)
            }
            (None, None) => return Ok(()),
        };
        let manifest = RunManifest {
            format: MANIFEST_FORMAT,
            version: MANIFEST_VERSION,
            subcommand: self.subcommand.into(),
            argv: std::env::args().collect(),
            config: self.config,
            seed: self.seed,
            inputs: self.inputs,
            outputs: self.outputs,
            library_version: patchwood::VERSION,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing manifest {}", path.display()))
    }
}
