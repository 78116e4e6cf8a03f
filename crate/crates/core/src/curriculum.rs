//! Structured training curriculum.
//!
//! Consumers train from the first update while firm prices and wages are
//! held at fixed grid points. The firm ranges then widen step by step, one
//! grid point per direction per sub-interval of the firm anneal span, and
//! firms start training once the full range is open. Tax rates follow the
//! same pattern from zero upwards before the government starts training.
//! Work disutility ramps linearly from zero, and every type's entropy
//! coefficient decays from the moment that type starts training.

use std::fmt::Write as _;

use crate::agent::{AgentType, PerType};
use crate::config::{grid_index, CurriculumConfig, EconomyConfig};
use crate::error::Result;
use crate::neural::HeadMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gates {
    pub consumer: bool,
    pub firm: bool,
    pub government: bool,
}

impl Gates {
    pub fn open(&self, a: AgentType) -> bool {
        match a {
            AgentType::Consumer => self.consumer,
            AgentType::Firm => self.firm,
            AgentType::Government => self.government,
        }
    }
}

/// Everything the trainer needs from the curriculum at one update.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub theta: f64,
    pub masks: PerType<Vec<HeadMask>>,
    pub entropy: PerType<f64>,
    pub gates: Gates,
}

#[derive(Debug, Clone, Copy)]
struct Widening {
    len: usize,
    center: usize,
}

impl Widening {
    fn steps(&self) -> usize {
        self.center.max(self.len - 1 - self.center)
    }

    fn mask(&self, k: usize) -> Vec<bool> {
        (0..self.len)
            .map(|i| i + k >= self.center && i <= self.center + k)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Curriculum {
    cfg: CurriculumConfig,
    theta_final: f64,
    consumer_heads: usize,
    price: Widening,
    wage: Widening,
    tax: Widening,
}

impl Curriculum {
    pub fn new(cfg: &CurriculumConfig, economy: &EconomyConfig) -> Result<Self> {
        cfg.validate(economy)?;
        let price = cfg.pinned_price.unwrap_or(economy.firm.initial_price);
        let price_center = grid_index(&economy.firm.price_grid, price).expect("validated");
        let wage_center = grid_index(&economy.firm.wage_grid, cfg.pinned_wage).expect("validated");
        Ok(Self {
            cfg: cfg.clone(),
            theta_final: economy.consumer.labor_disutility_theta,
            consumer_heads: AgentType::Consumer.head_sizes(economy).len(),
            price: Widening {
                len: economy.firm.price_grid.len(),
                center: price_center,
            },
            wage: Widening {
                len: economy.firm.wage_grid.len(),
                center: wage_center,
            },
            tax: Widening {
                len: economy.government.tax_grid.len(),
                center: 0,
            },
        })
    }

    pub fn config(&self) -> &CurriculumConfig {
        &self.cfg
    }

    /// Update at which `agent` starts training.
    pub fn training_start(&self, agent: AgentType) -> usize {
        if !self.cfg.enabled {
            return 0;
        }
        match agent {
            AgentType::Consumer => 0,
            AgentType::Firm => self.cfg.t_start_firm,
            AgentType::Government => self.cfg.t_start_government,
        }
    }

    /// `entropy_initial * max(exp(-t_rel / decay), min_coeff)` with the clock
    /// measured from the type's training start.
    pub fn entropy_coeff(&self, agent: AgentType, t: usize) -> f64 {
        let t_rel = t.saturating_sub(self.training_start(agent)) as f64;
        let decay = (-t_rel / self.cfg.entropy_decay_rate).exp();
        self.cfg.entropy_initial * decay.max(self.cfg.entropy_min_coeff)
    }

    pub fn theta(&self, t: usize) -> f64 {
        let span = self.cfg.theta_anneal_span;
        if !self.cfg.enabled || span == 0 || t >= span {
            return self.theta_final;
        }
        self.theta_final * t as f64 / span as f64
    }

    pub fn gates(&self, t: usize) -> Gates {
        if !self.cfg.enabled {
            return Gates {
                consumer: true,
                firm: true,
                government: true,
            };
        }
        Gates {
            consumer: true,
            firm: t > self.cfg.t_start_firm,
            government: t > self.cfg.t_start_government,
        }
    }

    /// Grid points opened after `t` updates of an anneal window that ends at
    /// `end` and lasts `span` updates, for a head needing `steps` widenings.
    fn opened(t: usize, end: usize, span: usize, steps: usize) -> usize {
        let start = end - span;
        if t < start {
            0
        } else if t >= end || span == 0 {
            steps
        } else {
            ((t - start) * steps / span).min(steps)
        }
    }

    pub fn action_masks(&self, agent: AgentType, t: usize) -> Vec<HeadMask> {
        match agent {
            AgentType::Consumer => vec![None; self.consumer_heads],
            _ if !self.cfg.enabled => vec![None; 2],
            AgentType::Firm => {
                let (end, span) = (self.cfg.t_start_firm, self.cfg.firm_anneal_span);
                [self.price, self.wage]
                    .iter()
                    .map(|w| {
                        let k = Self::opened(t, end, span, w.steps());
                        Some(w.mask(k))
                    })
                    .collect()
            }
            AgentType::Government => {
                let (end, span) = (self.cfg.t_start_government, self.cfg.government_anneal_span);
                let k = Self::opened(t, end, span, self.tax.steps());
                vec![Some(self.tax.mask(k)); 2]
            }
        }
    }

    pub fn schedule(&self, t: usize) -> Schedule {
        Schedule {
            theta: self.theta(t),
            masks: PerType::from_fn(|a| self.action_masks(a, t)),
            entropy: PerType::from_fn(|a| self.entropy_coeff(a, t)),
            gates: self.gates(t),
        }
    }

    /// Schedule with every anneal completed: full action ranges, final
    /// disutility, minimum entropy coefficient and all gates open.
    pub fn terminal(&self) -> Schedule {
        let floor = self.cfg.entropy_initial * self.cfg.entropy_min_coeff;
        Schedule {
            theta: self.theta_final,
            masks: PerType {
                consumer: vec![None; self.consumer_heads],
                firm: vec![None; 2],
                government: vec![None; 2],
            },
            entropy: PerType {
                consumer: floor,
                firm: floor,
                government: floor,
            },
            gates: Gates {
                consumer: true,
                firm: true,
                government: true,
            },
        }
    }

    /// CSV of the schedule at every `stride`-th update up to `until`.
    pub fn dump_csv(&self, until: usize, stride: usize) -> String {
        let mut out = String::from(
            "t,theta,entropy_consumer,entropy_firm,entropy_government,\
             train_consumer,train_firm,train_government,\
             price_options,wage_options,tax_income_options,tax_corporate_options\n",
        );
        let count = |m: &HeadMask, full: usize| m.as_ref().map_or(full, |m| m.iter().filter(|x| **x).count());
        let mut t = 0;
        while t <= until {
            let s = self.schedule(t);
            let f = &s.masks.firm;
            let g = &s.masks.government;
            let _ = writeln!(
                out,
                "{t},{},{},{},{},{},{},{},{},{},{},{}",
                s.theta,
                s.entropy.consumer,
                s.entropy.firm,
                s.entropy.government,
                u8::from(s.gates.consumer),
                u8::from(s.gates.firm),
                u8::from(s.gates.government),
                count(&f[0], self.price.len),
                count(&f[1], self.wage.len),
                count(&g[0], self.tax.len),
                count(&g[1], self.tax.len),
            );
            t += stride.max(1);
        }
        out
    }
}
