//! Run configuration: economy parameters, training hyperparameters and
//! curriculum schedules.
//!
//! The on-disk format is TOML with one table per agent type:
//!
//! ```text
//! [economy]            counts and episode length
//! [economy.consumer]   utility, budgets, consumption/hours grids
//! [economy.firm]       production, prices, wages, investment
//! [economy.government] welfare definition and tax grid
//! [economy.export]     open-economy export market
//! [training]           optimizer, PPO and batching settings
//! [curriculum]         staged training and annealing schedules
//! ```
//!
//! Every key is optional; missing keys take the defaults documented on each
//! field. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Result};

/// Social welfare definition used as the government's reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WelfareMode {
    /// Sum of consumer utilities.
    ConsumerOnly,
    /// Consumer utilities plus down-weighted firm profits.
    Total,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsumerConfig {
    /// CRRA curvature of consumption utility.
    pub crra_eta: f64,
    /// Per-hour disutility of work once fully annealed.
    pub labor_disutility_theta: f64,
    /// Seed money each consumer starts an episode with.
    pub initial_budget: f64,
    pub discount: f64,
    /// Shape of the Pareto quantile used for the optional skill draw.
    pub pareto_scale: f64,
    /// Multiply each consumer's effective labor (and pay) by a deterministic
    /// Pareto-quantile skill. Off by default.
    pub pareto_skill: bool,
    /// Attempted consumption per good.
    pub consumption_grid: Vec<f64>,
    /// Hours worked per step.
    pub hours_grid: Vec<f64>,
}

impl Default for ConsumerConfig {
    fn default() -> Self {
        Self {
            crra_eta: 0.1,
            labor_disutility_theta: 0.01,
            initial_budget: 1000.0,
            discount: 0.99,
            pareto_scale: 4.0,
            pareto_skill: false,
            consumption_grid: (0..=10).map(f64::from).collect(),
            hours_grid: vec![0.0, 260.0, 520.0, 780.0, 1040.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FirmConfig {
    /// Total factor productivity; one value for all firms or one per firm.
    pub production_a: Vec<f64>,
    /// Production exponents. One per firm, or a shorter list that is cycled
    /// within each capital group.
    pub production_alpha: Vec<f64>,
    /// Initial capital. One per firm, or one per capital group (firms are
    /// split into equally sized contiguous groups).
    pub initial_capital: Vec<f64>,
    pub initial_budget: f64,
    pub initial_price: f64,
    pub initial_wage: f64,
    /// Fraction of a positive budget invested in capital each step.
    pub invest_fraction: f64,
    pub discount: f64,
    /// Reward added at the last step to every firm with a negative budget,
    /// in raw (unscaled) profit units.
    pub no_ponzi_penalty: f64,
    pub price_grid: Vec<f64>,
    pub wage_grid: Vec<f64>,
}

impl Default for FirmConfig {
    fn default() -> Self {
        Self {
            production_a: vec![1.0],
            production_alpha: vec![0.2, 0.4, 0.6, 0.8],
            initial_capital: vec![5000.0, 10000.0],
            initial_budget: 2_200_000.0,
            initial_price: 1000.0,
            initial_wage: 0.0,
            invest_fraction: 0.1,
            discount: 0.99,
            no_ponzi_penalty: -30_000.0,
            price_grid: (0..=5).map(|k| 500.0 * f64::from(k)).collect(),
            wage_grid: (0..=4).map(|k| 11.0 * f64::from(k)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GovernmentConfig {
    pub welfare_mode: WelfareMode,
    pub firm_welfare_weight: f64,
    pub discount: f64,
    /// When aggregate tax revenue would be negative (corporate rebates on
    /// losses exceed collections), shrink the rebates pro rata so that the
    /// revenue is exactly zero.
    pub floor_tax_revenue: bool,
    /// Shared grid for the income and corporate tax rates.
    pub tax_grid: Vec<f64>,
}

impl Default for GovernmentConfig {
    fn default() -> Self {
        Self {
            welfare_mode: WelfareMode::Total,
            firm_welfare_weight: 0.0025,
            discount: 0.99,
            floor_tax_revenue: true,
            tax_grid: (0..=5).map(|k| f64::from(k) / 5.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExportConfig {
    pub enabled: bool,
    /// Export happens only at prices strictly above this.
    pub min_price: f64,
    /// Maximum exported units per good per step.
    pub quota: f64,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            min_price: 500.0,
            quota: 100.0,
        }
    }
}

/// Everything the simulator needs to run an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EconomyConfig {
    pub num_consumers: usize,
    pub num_firms: usize,
    /// Episode length in quarters.
    pub episode_length: usize,
    pub consumer: ConsumerConfig,
    pub firm: FirmConfig,
    pub government: GovernmentConfig,
    pub export: ExportConfig,
}

impl Default for EconomyConfig {
    fn default() -> Self {
        Self {
            num_consumers: 100,
            num_firms: 10,
            episode_length: 40,
            consumer: ConsumerConfig::default(),
            firm: FirmConfig::default(),
            government: GovernmentConfig::default(),
            export: ExportConfig::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn check_grid(name: &str, grid: &[f64]) -> std::result::Result<(), ConfigError> {
    if grid.is_empty() {
        return Err(invalid(format!("{name} must not be empty")));
    }
    if grid.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(invalid(format!("{name} values must be finite and >= 0")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(format!(
            "{name} must be strictly increasing (grid step sizes > 0)"
        )));
    }
    Ok(())
}

fn check_discount(name: &str, g: f64) -> std::result::Result<(), ConfigError> {
    if !(g > 0.0 && g <= 1.0) {
        return Err(invalid(format!("{name} must lie in (0, 1], got {g}")));
    }
    Ok(())
}

impl EconomyConfig {
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        if self.num_consumers == 0 || self.num_firms == 0 || self.episode_length == 0 {
            return Err(invalid(
                "num_consumers, num_firms and episode_length must be >= 1",
            ));
        }
        let c = &self.consumer;
        if (c.crra_eta - 1.0).abs() < 1e-12 || !c.crra_eta.is_finite() {
            return Err(invalid("crra_eta must be finite and != 1"));
        }
        if c.labor_disutility_theta < 0.0 || c.initial_budget < 0.0 {
            return Err(invalid(
                "labor_disutility_theta and consumer initial_budget must be >= 0",
            ));
        }
        if c.pareto_scale <= 0.0 {
            return Err(invalid("pareto_scale must be > 0"));
        }
        check_discount("consumer.discount", c.discount)?;
        check_grid("consumer.consumption_grid", &c.consumption_grid)?;
        check_grid("consumer.hours_grid", &c.hours_grid)?;

        let f = &self.firm;
        if !(0.0..=1.0).contains(&f.invest_fraction) {
            return Err(invalid("invest_fraction must lie in [0, 1]"));
        }
        check_discount("firm.discount", f.discount)?;
        check_grid("firm.price_grid", &f.price_grid)?;
        check_grid("firm.wage_grid", &f.wage_grid)?;
        for (name, list) in [
            ("production_a", &f.production_a),
            ("production_alpha", &f.production_alpha),
            ("initial_capital", &f.initial_capital),
        ] {
            if list.is_empty() {
                return Err(invalid(format!("firm.{name} needs at least one entry")));
            }
        }
        if f.production_alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(invalid("production_alpha values must lie in [0, 1]"));
        }
        if f.initial_capital.iter().any(|k| *k <= 0.0) {
            return Err(invalid("initial_capital must be > 0"));
        }
        if f.production_a.iter().any(|a| *a < 0.0) {
            return Err(invalid("production_a must be >= 0"));
        }
        if f.initial_price < 0.0 || f.initial_wage < 0.0 {
            return Err(invalid("initial price and wage must be >= 0"));
        }

        let g = &self.government;
        check_discount("government.discount", g.discount)?;
        check_grid("government.tax_grid", &g.tax_grid)?;
        check_tax_grid(&g.tax_grid)?;
        if g.firm_welfare_weight < 0.0 {
            return Err(invalid("firm_welfare_weight must be >= 0"));
        }
        if self.export.quota < 0.0 || self.export.min_price < 0.0 {
            return Err(invalid("export quota and min_price must be >= 0"));
        }
        Ok(())
    }

    /// Productivity multiplier of firm `i`.
    pub fn firm_a(&self, i: usize) -> f64 {
        per_firm_broadcast(&self.firm.production_a, self.num_firms, i)
    }

    /// Initial capital of firm `i`.
    pub fn firm_initial_capital(&self, i: usize) -> f64 {
        per_firm_broadcast(&self.firm.initial_capital, self.num_firms, i)
    }

    /// Production exponent of firm `i`.
    ///
    /// A full-length list is used as is. A shorter list is cycled within
    /// each capital group, which with the defaults yields two groups of five
    /// firms with exponents 0.2, 0.4, 0.6, 0.8, 0.2.
    pub fn firm_alpha(&self, i: usize) -> f64 {
        let alphas = &self.firm.production_alpha;
        if alphas.len() == self.num_firms {
            return alphas[i];
        }
        let groups = self.firm.initial_capital.len();
        let group = group_of(i, self.num_firms, groups);
        let first = (0..self.num_firms)
            .find(|&k| group_of(k, self.num_firms, groups) == group)
            .unwrap_or(0);
        alphas[(i - first) % alphas.len()]
    }

    /// Number of taxes levels; income and corporate share the grid.
    pub fn num_tax_levels(&self) -> usize {
        self.government.tax_grid.len()
    }
}

/// Tax grids must run evenly from 0 to 1.
fn check_tax_grid(grid: &[f64]) -> std::result::Result<(), ConfigError> {
    let n = grid.len();
    if n < 2 || grid[0] != 0.0 || (grid[n - 1] - 1.0).abs() > 1e-9 {
        return Err(invalid("tax_grid must start at 0 and end at 1"));
    }
    let step = 1.0 / (n - 1) as f64;
    for (k, v) in grid.iter().enumerate() {
        if (v - step * k as f64).abs() > 1e-9 {
            return Err(invalid(format!(
                "tax_grid must be evenly spaced from 0 to 1 (bad value {v})"
            )));
        }
    }
    Ok(())
}

fn group_of(i: usize, n: usize, groups: usize) -> usize {
    i * groups / n
}

fn per_firm_broadcast(list: &[f64], n: usize, i: usize) -> f64 {
    if list.len() == n {
        list[i]
    } else {
        list[group_of(i, n, list.len())]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ppo,
    Reinforce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    /// Number of collect/update cycles.
    pub num_updates: usize,
    /// Parallel environment replicas per rollout, each one full episode.
    pub num_replicas: usize,
    /// Rollout worker threads; 0 uses every available core.
    pub workers: usize,
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub learning_rate_government: f64,
    pub algorithm: Algorithm,
    pub ppo_clip: f64,
    pub ppo_epochs: usize,
    pub max_grad_norm: f64,
    pub value_loss_coeff: f64,
    /// Rewards are divided by these before entering the losses.
    pub consumer_reward_scale: f64,
    pub firm_reward_scale: f64,
    pub government_reward_scale: f64,
    /// Checkpoint period in updates; 0 writes only the initial and final
    /// checkpoints.
    pub checkpoint_every: usize,
    /// Episodes used by policy evaluation.
    pub eval_episodes: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            num_updates: 20_000,
            num_replicas: 128,
            workers: 0,
            hidden_width: 128,
            learning_rate: 0.001,
            learning_rate_government: 0.0005,
            algorithm: Algorithm::Ppo,
            ppo_clip: 0.2,
            ppo_epochs: 2,
            max_grad_norm: 2.0,
            value_loss_coeff: 0.5,
            consumer_reward_scale: 5.0,
            firm_reward_scale: 30_000.0,
            government_reward_scale: 1000.0,
            checkpoint_every: 1000,
            eval_episodes: 32,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        if self.num_replicas == 0 || self.hidden_width == 0 || self.eval_episodes == 0 {
            return Err(invalid(
                "num_replicas, hidden_width and eval_episodes must be >= 1",
            ));
        }
        if self.ppo_epochs == 0 {
            return Err(invalid("ppo_epochs must be >= 1"));
        }
        if !(self.ppo_clip > 0.0 && self.ppo_clip < 1.0) {
            return Err(invalid("ppo_clip must lie in (0, 1)"));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("learning_rate_government", self.learning_rate_government),
            ("max_grad_norm", self.max_grad_norm),
            ("consumer_reward_scale", self.consumer_reward_scale),
            ("firm_reward_scale", self.firm_reward_scale),
            ("government_reward_scale", self.government_reward_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be finite and > 0")));
            }
        }
        if self.value_loss_coeff < 0.0 {
            return Err(invalid("value_loss_coeff must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumConfig {
    /// `false` runs the ablation: full action ranges, constant disutility
    /// and every agent type training from the first update.
    pub enabled: bool,
    pub t_start_firm: usize,
    pub t_start_government: usize,
    /// Updates over which firm price/wage ranges widen, ending at
    /// `t_start_firm`.
    pub firm_anneal_span: usize,
    /// Updates over which tax ranges widen, ending at `t_start_government`.
    pub government_anneal_span: usize,
    /// Updates over which the work disutility ramps from 0 to its value.
    pub theta_anneal_span: usize,
    pub entropy_initial: f64,
    pub entropy_min_coeff: f64,
    pub entropy_decay_rate: f64,
    /// Price firms are held at before their range opens; defaults to the
    /// initial price when absent.
    pub pinned_price: Option<f64>,
    /// Wage firms are held at before their range opens.
    pub pinned_wage: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            t_start_firm: 5000,
            t_start_government: 10_000,
            firm_anneal_span: 2500,
            government_anneal_span: 2500,
            theta_anneal_span: 5000,
            entropy_initial: 0.5,
            entropy_min_coeff: 0.1,
            entropy_decay_rate: 10_000.0,
            pinned_price: None,
            pinned_wage: 22.0,
        }
    }
}

impl CurriculumConfig {
    pub fn validate(&self, economy: &EconomyConfig) -> std::result::Result<(), ConfigError> {
        if self.firm_anneal_span > self.t_start_firm {
            return Err(invalid(
                "firm_anneal_span must end at or before t_start_firm",
            ));
        }
        if self.t_start_government <= self.t_start_firm {
            return Err(invalid(
                "gates must be ordered: t_start_firm < t_start_government",
            ));
        }
        if self.t_start_government < self.government_anneal_span
            || self.t_start_government - self.government_anneal_span < self.t_start_firm
        {
            return Err(invalid(
                "government anneal must start after the firm gate and end at t_start_government",
            ));
        }
        if !(self.entropy_initial >= 0.0 && self.entropy_decay_rate > 0.0) {
            return Err(invalid(
                "entropy_initial must be >= 0 and entropy_decay_rate > 0",
            ));
        }
        if !(0.0..=1.0).contains(&self.entropy_min_coeff) {
            return Err(invalid("entropy_min_coeff must lie in [0, 1]"));
        }
        let price = self.pinned_price.unwrap_or(economy.firm.initial_price);
        if grid_index(&economy.firm.price_grid, price).is_none() {
            return Err(invalid(format!("pinned price {price} is not on price_grid")));
        }
        if grid_index(&economy.firm.wage_grid, self.pinned_wage).is_none() {
            return Err(invalid(format!(
                "pinned wage {} is not on wage_grid",
                self.pinned_wage
            )));
        }
        Ok(())
    }
}

/// Index of `value` on `grid`, matching to a relative tolerance of 1e-9.
pub fn grid_index(grid: &[f64], value: f64) -> Option<usize> {
    grid.iter()
        .position(|g| (g - value).abs() <= 1e-9 * g.abs().max(1.0))
}

/// The full configuration bundle loaded from a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub economy: EconomyConfig,
    pub training: TrainingConfig,
    pub curriculum: CurriculumConfig,
}

impl RunConfig {
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        self.economy.validate()?;
        self.training.validate()?;
        self.curriculum.validate(&self.economy)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }
}
