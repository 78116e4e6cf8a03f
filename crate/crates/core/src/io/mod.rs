//! Run persistence: checkpoints, metrics, rollout dumps and manifests.

pub mod checkpoint;
pub mod manifest;
pub mod metrics;
pub mod rollout;

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use checkpoint::Checkpoint;
pub use manifest::RunManifest;
pub use metrics::{MetricsRow, MetricsWriter, METRICS_COLUMNS};
pub use rollout::{EpisodeRecord, StepRecord, ROLLOUT_SCHEMA_VERSION};

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
