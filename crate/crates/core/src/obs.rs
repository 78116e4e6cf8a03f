//! Fixed-width observation vectors for each agent type.
//!
//! Every agent sees the global block: normalized time, digit-encoded
//! inventories, prices, wages, last step's overdemand flags and the current
//! tax rates. Consumers append their digit-encoded budget and the current
//! work disutility; firms append a sign bit and digits of their budget,
//! digits of their capital, a one-hot identity and their production
//! exponent. The government sees only the global block.
//!
//! All features lie in `[-1, 1]`.

use serde::Serialize;

use crate::agent::AgentType;
use crate::config::EconomyConfig;
use crate::economy::{Economy, WorldState};
use crate::error::{Error, Result};
use crate::neural::Real;

pub const BUDGET_DIGITS: usize = 7;
pub const STOCK_DIGITS: usize = 6;

/// Base-10 digits of `round(value)`, least significant first, each divided
/// by 9. Values with more than `num_digits` digits saturate to all nines.
pub fn encode_digits(value: f64, num_digits: usize) -> Result<Vec<f64>> {
    if value < 0.0 || value.is_nan() {
        return Err(Error::NegativeEncoding(value));
    }
    let mut out = vec![0.0; num_digits];
    write_digits(value, &mut out);
    Ok(out)
}

fn write_digits<T: Real>(value: f64, out: &mut [T]) {
    let n = out.len();
    let v = value.round();
    if v >= 10f64.powi(n as i32) {
        out.fill(T::one());
        return;
    }
    let mut rest = v as u64;
    for slot in out.iter_mut() {
        *slot = T::of((rest % 10) as f64 / 9.0);
        rest /= 10;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    /// `"scaled"`, `"digits"`, `"flag"`, `"sign"` or `"one_hot"`.
    pub encoding: &'static str,
    /// Divisor applied to scaled features (1 for other encodings).
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeLayout {
    pub width: usize,
    pub blocks: Vec<Block>,
}

impl TypeLayout {
    fn push(&mut self, name: impl Into<String>, len: usize, encoding: &'static str, scale: f64) {
        self.blocks.push(Block {
            name: name.into(),
            offset: self.width,
            len,
            encoding,
            scale,
        });
        self.width += len;
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }
}

/// Observation layout of all three agent types.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObsLayout {
    pub consumer: TypeLayout,
    pub firm: TypeLayout,
    pub government: TypeLayout,
}

impl ObsLayout {
    pub fn new(cfg: &EconomyConfig) -> Self {
        let nf = cfg.num_firms;
        let price_scale = grid_max(&cfg.firm.price_grid);
        let wage_scale = grid_max(&cfg.firm.wage_grid);
        let tax_scale = grid_max(&cfg.government.tax_grid);
        let mut global = TypeLayout {
            width: 0,
            blocks: Vec::new(),
        };
        global.push("time", 1, "scaled", cfg.episode_length as f64);
        global.push("inventory", nf * STOCK_DIGITS, "digits", 1.0);
        global.push("price", nf, "scaled", price_scale);
        global.push("wage", nf, "scaled", wage_scale);
        global.push("overdemand", nf, "flag", 1.0);
        global.push("tax_income", 1, "scaled", tax_scale);
        global.push("tax_corporate", 1, "scaled", tax_scale);

        let mut consumer = global.clone();
        consumer.push("budget", BUDGET_DIGITS, "digits", 1.0);
        consumer.push("theta", 1, "scaled", cfg.consumer.labor_disutility_theta);

        let mut firm = global.clone();
        firm.push("budget_sign", 1, "sign", 1.0);
        firm.push("budget", BUDGET_DIGITS, "digits", 1.0);
        firm.push("capital", STOCK_DIGITS, "digits", 1.0);
        firm.push("identity", nf, "one_hot", 1.0);
        firm.push("alpha", 1, "scaled", 1.0);

        Self {
            consumer,
            firm,
            government: global,
        }
    }

    pub fn width(&self, agent: AgentType) -> usize {
        match agent {
            AgentType::Consumer => self.consumer.width,
            AgentType::Firm => self.firm.width,
            AgentType::Government => self.government.width,
        }
    }

    pub fn global_width(&self) -> usize {
        self.government.width
    }
}

fn grid_max(grid: &[f64]) -> f64 {
    let m = grid.iter().cloned().fold(0.0, f64::max);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Writes observations into caller-provided buffers.
#[derive(Debug, Clone)]
pub struct ObsEncoder {
    layout: ObsLayout,
    price_scale: f64,
    wage_scale: f64,
    tax_scale: f64,
    theta_scale: f64,
    num_consumers: usize,
    num_firms: usize,
    horizon: f64,
    alpha: Vec<f64>,
}

impl ObsEncoder {
    pub fn new(economy: &Economy) -> Self {
        let cfg = economy.config();
        let theta = cfg.consumer.labor_disutility_theta;
        Self {
            layout: ObsLayout::new(cfg),
            price_scale: grid_max(&cfg.firm.price_grid),
            wage_scale: grid_max(&cfg.firm.wage_grid),
            tax_scale: grid_max(&cfg.government.tax_grid),
            theta_scale: if theta > 0.0 { theta } else { 1.0 },
            num_consumers: cfg.num_consumers,
            num_firms: cfg.num_firms,
            horizon: cfg.episode_length as f64,
            alpha: (0..cfg.num_firms).map(|i| economy.alpha(i)).collect(),
        }
    }

    pub fn layout(&self) -> &ObsLayout {
        &self.layout
    }

    pub fn write_global(&self, s: &WorldState, out: &mut [f32]) {
        let nf = self.num_firms;
        let mut o = 0;
        out[o] = (s.t as f64 / self.horizon) as f32;
        o += 1;
        for i in 0..nf {
            write_digits(s.inventory[i].max(0.0), &mut out[o..o + STOCK_DIGITS]);
            o += STOCK_DIGITS;
        }
        for i in 0..nf {
            out[o + i] = (s.price[i] / self.price_scale) as f32;
        }
        o += nf;
        for i in 0..nf {
            out[o + i] = (s.wage[i] / self.wage_scale) as f32;
        }
        o += nf;
        for i in 0..nf {
            out[o + i] = if s.overdemand[i] { 1.0 } else { 0.0 };
        }
        o += nf;
        out[o] = (s.tax_income / self.tax_scale) as f32;
        out[o + 1] = (s.tax_corporate / self.tax_scale) as f32;
    }

    pub fn write_consumer(&self, s: &WorldState, j: usize, theta: f64, out: &mut [f32]) -> Result<()> {
        if j >= self.num_consumers {
            return Err(Error::IndexOutOfRange {
                what: "consumers",
                index: j,
                len: self.num_consumers,
            });
        }
        let g = self.layout.global_width();
        self.write_global(s, &mut out[..g]);
        write_digits(s.consumer_budget[j].max(0.0), &mut out[g..g + BUDGET_DIGITS]);
        out[g + BUDGET_DIGITS] = (theta / self.theta_scale).min(1.0) as f32;
        Ok(())
    }

    pub fn write_firm(&self, s: &WorldState, i: usize, out: &mut [f32]) -> Result<()> {
        if i >= self.num_firms {
            return Err(Error::IndexOutOfRange {
                what: "firms",
                index: i,
                len: self.num_firms,
            });
        }
        let g = self.layout.global_width();
        self.write_global(s, &mut out[..g]);
        let b = s.firm_budget[i];
        let mut o = g;
        out[o] = if b < 0.0 { -1.0 } else { 1.0 };
        o += 1;
        write_digits(b.abs(), &mut out[o..o + BUDGET_DIGITS]);
        o += BUDGET_DIGITS;
        write_digits(s.capital[i].max(0.0), &mut out[o..o + STOCK_DIGITS]);
        o += STOCK_DIGITS;
        out[o..o + self.num_firms].fill(0.0);
        out[o + i] = 1.0;
        o += self.num_firms;
        out[o] = self.alpha[i] as f32;
        Ok(())
    }

    pub fn write_government(&self, s: &WorldState, out: &mut [f32]) {
        self.write_global(s, out);
    }

    pub fn global_obs(&self, s: &WorldState) -> Vec<f32> {
        let mut v = vec![0.0; self.layout.government.width];
        self.write_global(s, &mut v);
        v
    }

    pub fn consumer_obs(&self, s: &WorldState, j: usize, theta: f64) -> Result<Vec<f32>> {
        let mut v = vec![0.0; self.layout.consumer.width];
        self.write_consumer(s, j, theta, &mut v)?;
        Ok(v)
    }

    pub fn firm_obs(&self, s: &WorldState, i: usize) -> Result<Vec<f32>> {
        let mut v = vec![0.0; self.layout.firm.width];
        self.write_firm(s, i, &mut v)?;
        Ok(v)
    }

    pub fn government_obs(&self, s: &WorldState) -> Vec<f32> {
        self.global_obs(s)
    }
}
