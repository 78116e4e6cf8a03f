use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub seed: u64,
    pub code_version: String,
    pub command_line: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub resumed_from: Option<String>,
    /// Files written into the run directory, relative paths.
    pub files: Vec<String>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn new(config: RunConfig, seed: u64, command_line: Vec<String>) -> Self {
        Self {
            config,
            seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            command_line,
            started_unix: unix_now(),
            finished_unix: None,
            resumed_from: None,
            files: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        super::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        super::read_json(path)
    }
}
