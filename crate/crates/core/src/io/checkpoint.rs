use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentType, PerType};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::neural::PolicyNet;
use crate::obs::ObsLayout;
use crate::rl::Adam;

pub const CHECKPOINT_FORMAT: u32 = 1;

/// Complete training state after `update` completed updates.
///
/// Stored as JSON; f32 values are written in shortest round-trip form, so
/// loading reproduces every parameter bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub update: usize,
    pub seed: u64,
    pub config: RunConfig,
    pub nets: PerType<PolicyNet<f32>>,
    pub optim: PerType<Adam<f32>>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        super::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Self = super::read_json(path).map_err(|e| match e {
            Error::Json(e) => Error::Checkpoint(format!("{}: {e}", path.display())),
            other => other,
        })?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!(
                "{}: format {} is not supported (expected {CHECKPOINT_FORMAT})",
                path.display(),
                ck.format
            )));
        }
        ck.validate()?;
        Ok(ck)
    }

    /// Checks that the stored networks fit the stored configuration.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let layout = ObsLayout::new(&self.config.economy);
        for a in AgentType::ALL {
            let net = self.nets.get(a);
            if net.spec.input_dim != layout.width(a) || net.spec.head_sizes != a.head_sizes(&self.config.economy) {
                return Err(Error::Checkpoint(format!(
                    "{a} network does not match the economy in the checkpoint"
                )));
            }
            if self.optim.get(a).m.len() != net.tensors().len() {
                return Err(Error::Checkpoint(format!("{a} optimizer state has the wrong shape")));
            }
        }
        Ok(())
    }
}
