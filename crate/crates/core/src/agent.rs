use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::EconomyConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentType {
    Consumer,
    Firm,
    Government,
}

impl AgentType {
    pub const ALL: [AgentType; 3] = [AgentType::Consumer, AgentType::Firm, AgentType::Government];

    pub fn index(self) -> usize {
        match self {
            AgentType::Consumer => 0,
            AgentType::Firm => 1,
            AgentType::Government => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentType::Consumer => "consumer",
            AgentType::Firm => "firm",
            AgentType::Government => "government",
        }
    }

    /// Number of agents of this type in one replica.
    pub fn count(self, cfg: &EconomyConfig) -> usize {
        match self {
            AgentType::Consumer => cfg.num_consumers,
            AgentType::Firm => cfg.num_firms,
            AgentType::Government => 1,
        }
    }

    /// Action head cardinalities.
    ///
    /// Consumers: one consumption head per good, the employer, the hours.
    /// Firms: price, wage. Government: income tax, corporate tax.
    pub fn head_sizes(self, cfg: &EconomyConfig) -> Vec<usize> {
        match self {
            AgentType::Consumer => {
                let mut h = vec![cfg.consumer.consumption_grid.len(); cfg.num_firms];
                h.push(cfg.num_firms);
                h.push(cfg.consumer.hours_grid.len());
                h
            }
            AgentType::Firm => vec![cfg.firm.price_grid.len(), cfg.firm.wage_grid.len()],
            AgentType::Government => vec![cfg.num_tax_levels(); 2],
        }
    }

    pub fn discount(self, cfg: &EconomyConfig) -> f64 {
        match self {
            AgentType::Consumer => cfg.consumer.discount,
            AgentType::Firm => cfg.firm.discount,
            AgentType::Government => cfg.government.discount,
        }
    }
}

impl fmt::Display for AgentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "c" | "consumer" => Ok(AgentType::Consumer),
            "f" | "firm" => Ok(AgentType::Firm),
            "g" | "government" => Ok(AgentType::Government),
            other => Err(format!("unknown agent type `{other}` (expected c, f or g)")),
        }
    }
}

/// One value per agent type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PerType<T> {
    pub consumer: T,
    pub firm: T,
    pub government: T,
}

impl<T> PerType<T> {
    pub fn from_fn(mut f: impl FnMut(AgentType) -> T) -> Self {
        Self {
            consumer: f(AgentType::Consumer),
            firm: f(AgentType::Firm),
            government: f(AgentType::Government),
        }
    }

    pub fn get(&self, a: AgentType) -> &T {
        match a {
            AgentType::Consumer => &self.consumer,
            AgentType::Firm => &self.firm,
            AgentType::Government => &self.government,
        }
    }

    pub fn get_mut(&mut self, a: AgentType) -> &mut T {
        match a {
            AgentType::Consumer => &mut self.consumer,
            AgentType::Firm => &mut self.firm,
            AgentType::Government => &mut self.government,
        }
    }
}
