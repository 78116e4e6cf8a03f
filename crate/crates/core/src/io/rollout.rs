use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::PerType;
use crate::config::EconomyConfig;
use crate::error::{Error, Result};

pub const ROLLOUT_SCHEMA_VERSION: u32 = 1;

/// State at the start of step `t` together with the actions taken and the
/// resulting flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub t: usize,
    pub price: Vec<f64>,
    pub wage: Vec<f64>,
    pub tax_income: f64,
    pub tax_corporate: f64,
    pub inventory: Vec<f64>,
    pub capital: Vec<f64>,
    pub firm_budget: Vec<f64>,
    pub consumer_budget: Vec<f64>,
    /// Realized consumption, `[consumer][good]`.
    pub consumption: Vec<Vec<f64>>,
    pub hours: Vec<f64>,
    pub employer: Vec<Option<usize>>,
    pub production: Vec<f64>,
    pub export_sold: Vec<f64>,
    pub profit: Vec<f64>,
    pub utility: Vec<f64>,
    pub tax_revenue: f64,
    pub welfare: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeRecord {
    pub schema_version: u32,
    pub num_consumers: usize,
    pub num_firms: usize,
    pub episode_length: usize,
    pub economy: EconomyConfig,
    /// Undiscounted episode return per agent, raw units.
    pub episode_reward: PerType<f64>,
    pub steps: Vec<StepRecord>,
}

impl EpisodeRecord {
    pub fn new(economy: EconomyConfig, steps: Vec<StepRecord>, episode_reward: PerType<f64>) -> Self {
        Self {
            schema_version: ROLLOUT_SCHEMA_VERSION,
            num_consumers: economy.num_consumers,
            num_firms: economy.num_firms,
            episode_length: economy.episode_length,
            economy,
            episode_reward,
            steps,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        super::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let rec: Self = super::read_json(path)?;
        if rec.schema_version != ROLLOUT_SCHEMA_VERSION {
            return Err(Error::Checkpoint(format!(
                "rollout schema version {} is not supported (expected {ROLLOUT_SCHEMA_VERSION})",
                rec.schema_version
            )));
        }
        Ok(rec)
    }

    /// Time series of one per-firm field, `[t][firm]`.
    pub fn series(&self, f: impl Fn(&StepRecord) -> &Vec<f64>) -> Vec<Vec<f64>> {
        self.steps.iter().map(|s| f(s).clone()).collect()
    }
}
