//! One replica of the real-business-cycle economy.
//!
//! [`Economy::step`] advances a [`WorldState`] by one quarter given every
//! agent's action. The step is a pure function of its inputs, so replicas can
//! be stepped from any number of threads.
//!
//! Phase order inside a step:
//!
//! 1. labor is supplied at the current wages and output is added to stock;
//! 2. attempted consumption is scaled to each budget, then rationed against
//!    the stock;
//! 3. the export market buys from what is left (open economy only);
//! 4. firms invest a fraction of their current positive budget;
//! 5. profits, taxes, redistribution and budgets are settled;
//! 6. next prices, wages and tax rates are installed from the actions;
//! 7. the clock advances and overdemand flags are recorded.

pub mod ops;

use serde::{Deserialize, Serialize};

use crate::config::{grid_index, EconomyConfig};
use crate::error::{Error, Result};

pub use ops::{
    consumer_utility, export_step, firm_invest, produce, ration, scale_to_budget, social_welfare,
};

/// Complete state of one replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub t: usize,
    pub inventory: Vec<f64>,
    pub price: Vec<f64>,
    pub wage: Vec<f64>,
    pub tax_income: f64,
    pub tax_corporate: f64,
    pub consumer_budget: Vec<f64>,
    pub firm_budget: Vec<f64>,
    pub capital: Vec<f64>,
    /// Whether each good was overdemanded in the previous step.
    pub overdemand: Vec<bool>,
    pub last_tax_revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumerAction {
    /// Attempted units of each good.
    pub consumption: Vec<f64>,
    /// Employer for this step; `None` requires zero hours.
    pub work_firm: Option<usize>,
    pub hours: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirmAction {
    /// Price posted for the next step.
    pub price: f64,
    /// Wage offered for the next step.
    pub wage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GovernmentAction {
    pub tax_income: f64,
    pub tax_corporate: f64,
}

impl ConsumerAction {
    /// Builds an action from policy head indices: one consumption head per
    /// good, then the employer head, then the hours head.
    pub fn from_indices(cfg: &EconomyConfig, idx: &[usize]) -> Self {
        let n = cfg.num_firms;
        let grid = &cfg.consumer.consumption_grid;
        Self {
            consumption: idx[..n].iter().map(|&k| grid[k]).collect(),
            work_firm: Some(idx[n]),
            hours: cfg.consumer.hours_grid[idx[n + 1]],
        }
    }
}

impl FirmAction {
    pub fn from_indices(cfg: &EconomyConfig, idx: &[usize]) -> Self {
        Self {
            price: cfg.firm.price_grid[idx[0]],
            wage: cfg.firm.wage_grid[idx[1]],
        }
    }
}

impl GovernmentAction {
    pub fn from_indices(cfg: &EconomyConfig, idx: &[usize]) -> Self {
        let grid = &cfg.government.tax_grid;
        Self {
            tax_income: grid[idx[0]],
            tax_corporate: grid[idx[1]],
        }
    }
}

/// Everything that happened during one step. Rewards are raw (unscaled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    /// `realized_consumption[j][i]`: units of good `i` consumer `j` received.
    pub realized_consumption: Vec<Vec<f64>>,
    /// Budget-scaled attempted consumption, before rationing.
    pub scaled_attempt: Vec<Vec<f64>>,
    /// Skill-weighted hours worked at each firm.
    pub labor: Vec<f64>,
    pub production: Vec<f64>,
    pub export_sold: Vec<f64>,
    pub export_revenue: Vec<f64>,
    pub investment: Vec<f64>,
    pub profit: Vec<f64>,
    /// Corporate tax paid by each firm (negative for rebates).
    pub corporate_tax: Vec<f64>,
    pub labor_income: Vec<f64>,
    pub consumption_cost: Vec<f64>,
    pub tax_revenue: f64,
    pub utility: Vec<f64>,
    /// Profit plus the no-Ponzi penalty where it applies.
    pub firm_reward: Vec<f64>,
    pub welfare: f64,
    pub no_ponzi_violation: Vec<bool>,
}

impl StepOutcome {
    pub fn total_export_revenue(&self) -> f64 {
        self.export_revenue.iter().sum()
    }

    pub fn total_investment(&self) -> f64 {
        self.investment.iter().sum()
    }
}

/// Simulator for one economy configuration.
#[derive(Debug, Clone)]
pub struct Economy {
    cfg: EconomyConfig,
    alpha: Vec<f64>,
    productivity: Vec<f64>,
    skill: Vec<f64>,
}

impl Economy {
    pub fn new(cfg: EconomyConfig) -> Result<Self> {
        cfg.validate()?;
        let alpha = (0..cfg.num_firms).map(|i| cfg.firm_alpha(i)).collect();
        let productivity = (0..cfg.num_firms).map(|i| cfg.firm_a(i)).collect();
        let skill = (0..cfg.num_consumers)
            .map(|j| {
                if cfg.consumer.pareto_skill {
                    let q = (j as f64 + 0.5) / cfg.num_consumers as f64;
                    (1.0 - q).powf(-1.0 / cfg.consumer.pareto_scale)
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self {
            cfg,
            alpha,
            productivity,
            skill,
        })
    }

    pub fn config(&self) -> &EconomyConfig {
        &self.cfg
    }

    pub fn alpha(&self, firm: usize) -> f64 {
        self.alpha[firm]
    }

    /// Labor productivity multiplier of each consumer (1 unless the Pareto
    /// skill draw is enabled).
    pub fn skill(&self, consumer: usize) -> f64 {
        self.skill[consumer]
    }

    /// Initial state with tax rates at zero.
    pub fn reset(&self) -> WorldState {
        self.reset_with_taxes(0.0, 0.0)
    }

    pub fn reset_with_taxes(&self, tax_income: f64, tax_corporate: f64) -> WorldState {
        let c = &self.cfg;
        let nf = c.num_firms;
        WorldState {
            t: 0,
            inventory: vec![0.0; nf],
            price: vec![c.firm.initial_price; nf],
            wage: vec![c.firm.initial_wage; nf],
            tax_income,
            tax_corporate,
            consumer_budget: vec![c.consumer.initial_budget; c.num_consumers],
            firm_budget: vec![c.firm.initial_budget; nf],
            capital: (0..nf).map(|i| c.firm_initial_capital(i)).collect(),
            overdemand: vec![false; nf],
            last_tax_revenue: 0.0,
        }
    }

    fn validate_actions(
        &self,
        consumers: &[ConsumerAction],
        firms: &[FirmAction],
        gov: &GovernmentAction,
    ) -> Result<()> {
        let c = &self.cfg;
        let bad = |m: String| Err(Error::InvalidAction(m));
        if consumers.len() != c.num_consumers || firms.len() != c.num_firms {
            return bad(format!(
                "expected {} consumer and {} firm actions, got {} and {}",
                c.num_consumers,
                c.num_firms,
                consumers.len(),
                firms.len()
            ));
        }
        for (j, a) in consumers.iter().enumerate() {
            if a.consumption.len() != c.num_firms {
                return bad(format!("consumer {j}: basket has {} goods", a.consumption.len()));
            }
            if let Some(v) = a
                .consumption
                .iter()
                .find(|v| grid_index(&c.consumer.consumption_grid, **v).is_none())
            {
                return bad(format!("consumer {j}: consumption {v} is off grid"));
            }
            if grid_index(&c.consumer.hours_grid, a.hours).is_none() {
                return bad(format!("consumer {j}: hours {} off grid", a.hours));
            }
            match a.work_firm {
                Some(i) if i >= c.num_firms => {
                    return bad(format!("consumer {j}: firm {i} does not exist"))
                }
                None if a.hours != 0.0 => {
                    return bad(format!("consumer {j}: hours without an employer"))
                }
                _ => {}
            }
        }
        for (i, a) in firms.iter().enumerate() {
            if grid_index(&c.firm.price_grid, a.price).is_none() {
                return bad(format!("firm {i}: price {} off grid", a.price));
            }
            if grid_index(&c.firm.wage_grid, a.wage).is_none() {
                return bad(format!("firm {i}: wage {} off grid", a.wage));
            }
        }
        for v in [gov.tax_income, gov.tax_corporate] {
            if grid_index(&c.government.tax_grid, v).is_none() {
                return bad(format!("tax rate {v} off grid"));
            }
        }
        Ok(())
    }

    /// Advances `state` by one step. `theta` is the current per-hour work
    /// disutility (annealed by the curriculum during training).
    pub fn step(
        &self,
        state: &WorldState,
        consumers: &[ConsumerAction],
        firms: &[FirmAction],
        gov: &GovernmentAction,
        theta: f64,
    ) -> Result<(WorldState, StepOutcome)> {
        let c = &self.cfg;
        if state.t >= c.episode_length {
            return Err(Error::EpisodeFinished(state.t));
        }
        self.validate_actions(consumers, firms, gov)?;
        let nf = c.num_firms;
        let nc = c.num_consumers;

        // 1. labor and production
        let mut labor = vec![0.0; nf];
        for (j, a) in consumers.iter().enumerate() {
            if let Some(i) = a.work_firm {
                labor[i] += self.skill[j] * a.hours;
            }
        }
        let production: Vec<f64> = (0..nf)
            .map(|i| produce(state.capital[i], labor[i], self.productivity[i], self.alpha[i]))
            .collect();
        let available: Vec<f64> = (0..nf).map(|i| state.inventory[i] + production[i]).collect();

        // 2. budget scaling, then rationing
        let mut scaled: Vec<Vec<f64>> = consumers.iter().map(|a| a.consumption.clone()).collect();
        for (j, basket) in scaled.iter_mut().enumerate() {
            ops::scale_to_budget_in_place(basket, &state.price, state.consumer_budget[j]);
        }
        let mut factor = vec![1.0; nf];
        let mut overdemand = vec![false; nf];
        for i in 0..nf {
            let demand: f64 = scaled.iter().map(|b| b[i]).sum();
            (factor[i], overdemand[i]) = ops::ration_factor(demand, available[i]);
        }
        let realized: Vec<Vec<f64>> = scaled
            .iter()
            .map(|b| b.iter().zip(&factor).map(|(x, f)| x * f).collect())
            .collect();
        let sold: Vec<f64> = (0..nf).map(|i| realized.iter().map(|b| b[i]).sum()).collect();

        // 3. export
        let mut export_sold = vec![0.0; nf];
        let mut export_revenue = vec![0.0; nf];
        let mut inventory = vec![0.0; nf];
        for i in 0..nf {
            let remaining = (available[i] - sold[i]).max(0.0);
            (export_sold[i], export_revenue[i]) =
                export_step(state.price[i], remaining, &c.export);
            inventory[i] = (remaining - export_sold[i]).max(0.0);
        }

        // 4. investment
        let investment: Vec<f64> = state
            .firm_budget
            .iter()
            .map(|b| firm_invest(*b, c.firm.invest_fraction))
            .collect();
        let capital: Vec<f64> = state.capital.iter().zip(&investment).map(|(k, d)| k + d).collect();

        // 5. settlement
        let profit: Vec<f64> = (0..nf)
            .map(|i| {
                state.price[i] * sold[i] + export_revenue[i]
                    - state.wage[i] * labor[i]
                    - investment[i]
            })
            .collect();
        let labor_income: Vec<f64> = consumers
            .iter()
            .enumerate()
            .map(|(j, a)| match a.work_firm {
                Some(i) => state.wage[i] * self.skill[j] * a.hours,
                None => 0.0,
            })
            .collect();
        let consumption_cost: Vec<f64> = realized
            .iter()
            .map(|b| ops::basket_cost(b, &state.price))
            .collect();

        let income_tax: f64 = state.tax_income * labor_income.iter().sum::<f64>();
        let mut corporate_tax: Vec<f64> = profit.iter().map(|p| state.tax_corporate * p).collect();
        let mut tax_revenue = income_tax + corporate_tax.iter().sum::<f64>();
        if c.government.floor_tax_revenue && tax_revenue < 0.0 {
            let collected = income_tax + corporate_tax.iter().filter(|t| **t > 0.0).sum::<f64>();
            let rebates: f64 = corporate_tax.iter().filter(|t| **t < 0.0).sum();
            let shrink = collected / -rebates;
            for t in corporate_tax.iter_mut().filter(|t| **t < 0.0) {
                *t *= shrink;
            }
            tax_revenue = 0.0;
        }
        let transfer = tax_revenue / nc as f64;
        let consumer_budget: Vec<f64> = (0..nc)
            .map(|j| {
                state.consumer_budget[j] + (1.0 - state.tax_income) * labor_income[j] + transfer
                    - consumption_cost[j]
            })
            .collect();
        let firm_budget: Vec<f64> = (0..nf)
            .map(|i| state.firm_budget[i] + profit[i] - corporate_tax[i])
            .collect();

        // rewards
        let utility: Vec<f64> = (0..nc)
            .map(|j| consumer_utility(&realized[j], consumers[j].hours, theta, c.consumer.crra_eta))
            .collect();
        let last_step = state.t + 1 == c.episode_length;
        let no_ponzi_violation: Vec<bool> = firm_budget.iter().map(|b| last_step && *b < 0.0).collect();
        let firm_reward: Vec<f64> = profit
            .iter()
            .zip(&no_ponzi_violation)
            .map(|(p, v)| if *v { p + c.firm.no_ponzi_penalty } else { *p })
            .collect();
        let welfare = social_welfare(
            &utility,
            &profit,
            c.government.welfare_mode,
            c.government.firm_welfare_weight,
        );

        // 6-7. install next-step controls and advance the clock
        let next = WorldState {
            t: state.t + 1,
            inventory,
            price: firms.iter().map(|a| a.price).collect(),
            wage: firms.iter().map(|a| a.wage).collect(),
            tax_income: gov.tax_income,
            tax_corporate: gov.tax_corporate,
            consumer_budget,
            firm_budget,
            capital,
            overdemand,
            last_tax_revenue: tax_revenue,
        };
        let outcome = StepOutcome {
            realized_consumption: realized,
            scaled_attempt: scaled,
            labor,
            production,
            export_sold,
            export_revenue,
            investment,
            profit,
            corporate_tax,
            labor_income,
            consumption_cost,
            tax_revenue,
            utility,
            firm_reward,
            welfare,
            no_ponzi_violation,
        };
        Ok((next, outcome))
    }
}
