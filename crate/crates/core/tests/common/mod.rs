//! Independent oracles shared by the integration tests and the acceptance
//! suite. Nothing here calls into the simulator's arithmetic: the ledger is
//! rebuilt from the model equations with plain loops.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;

use rbc_core::config::Algorithm;
use rbc_core::economy::{ConsumerAction, FirmAction, GovernmentAction, WorldState};
use rbc_core::neural::{NetSpec, PolicyNet};
use rbc_core::rl::{row_loss, LossSettings};
use rbc_core::{AgentType, CurriculumConfig, EconomyConfig, RunConfig, WelfareMode};

/// `|a - b| <= tol * max(|a|, |b|, 1)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone)]
pub struct Ledger {
    pub consumer_budget: Vec<f64>,
    pub firm_budget: Vec<f64>,
    pub inventory: Vec<f64>,
    pub capital: Vec<f64>,
    pub realized: Vec<Vec<f64>>,
    pub production: Vec<f64>,
    pub export_revenue: Vec<f64>,
    pub investment: Vec<f64>,
    pub profit: Vec<f64>,
    pub tax_revenue: f64,
    pub utility: Vec<f64>,
    pub welfare: f64,
}

/// One step of the economy, written out term by term. Skills are all 1 and
/// the config must list `production_a` and `production_alpha` per firm.
pub fn ledger_step(
    cfg: &EconomyConfig,
    s: &WorldState,
    consumers: &[ConsumerAction],
    theta: f64,
) -> Ledger {
    let nf = cfg.num_firms;
    let nc = cfg.num_consumers;

    let mut labor = vec![0.0; nf];
    for c in consumers {
        if let Some(i) = c.work_firm {
            labor[i] += c.hours;
        }
    }
    let mut production = vec![0.0; nf];
    for i in 0..nf {
        let a = cfg.firm.production_a[i];
        let alpha = cfg.firm.production_alpha[i];
        production[i] = if labor[i] == 0.0 && alpha > 0.0 {
            0.0
        } else {
            a * s.capital[i].powf(1.0 - alpha) * labor[i].powf(alpha)
        };
    }

    let mut scaled = vec![vec![0.0; nf]; nc];
    for j in 0..nc {
        let mut cost = 0.0;
        for i in 0..nf {
            cost += s.price[i] * consumers[j].consumption[i];
        }
        // A budget pushed below zero by tax rebates buys nothing.
        let budget = s.consumer_budget[j].max(0.0);
        let factor = if cost > budget {
            budget / cost
        } else {
            1.0
        };
        for i in 0..nf {
            scaled[j][i] = consumers[j].consumption[i] * factor;
        }
    }

    let mut realized = vec![vec![0.0; nf]; nc];
    let mut sold = vec![0.0; nf];
    let mut export_sold = vec![0.0; nf];
    let mut export_revenue = vec![0.0; nf];
    let mut inventory = vec![0.0; nf];
    for i in 0..nf {
        let mut demand = 0.0;
        for row in &scaled {
            demand += row[i];
        }
        let available = s.inventory[i] + production[i];
        let ratio = if demand > available { available / demand } else { 1.0 };
        for j in 0..nc {
            realized[j][i] = scaled[j][i] * ratio;
            sold[i] += realized[j][i];
        }
        let remaining = (available - sold[i]).max(0.0);
        if cfg.export.enabled && s.price[i] > cfg.export.min_price {
            export_sold[i] = cfg.export.quota.min(remaining);
            export_revenue[i] = s.price[i] * export_sold[i];
        }
        inventory[i] = (remaining - export_sold[i]).max(0.0);
    }

    let mut investment = vec![0.0; nf];
    let mut capital = vec![0.0; nf];
    let mut profit = vec![0.0; nf];
    for i in 0..nf {
        if s.firm_budget[i] > 0.0 {
            investment[i] = cfg.firm.invest_fraction * s.firm_budget[i];
        }
        capital[i] = s.capital[i] + investment[i];
        profit[i] = s.price[i] * sold[i] + export_revenue[i] - s.wage[i] * labor[i] - investment[i];
    }

    let mut income = vec![0.0; nc];
    for j in 0..nc {
        if let Some(i) = consumers[j].work_firm {
            income[j] = s.wage[i] * consumers[j].hours;
        }
    }
    let income_total: f64 = income.iter().sum();
    let mut corporate: Vec<f64> = profit.iter().map(|p| s.tax_corporate * p).collect();
    let mut revenue = s.tax_income * income_total + corporate.iter().sum::<f64>();
    if cfg.government.floor_tax_revenue && revenue < 0.0 {
        let mut positive = s.tax_income * income_total;
        let mut negative = 0.0;
        for t in &corporate {
            if *t > 0.0 {
                positive += t;
            } else {
                negative -= t;
            }
        }
        for t in corporate.iter_mut() {
            if *t < 0.0 {
                *t *= positive / negative;
            }
        }
        revenue = 0.0;
    }

    let mut consumer_budget = vec![0.0; nc];
    let mut utility = vec![0.0; nc];
    let eta = cfg.consumer.crra_eta;
    for j in 0..nc {
        let mut spent = 0.0;
        let mut u = 0.0;
        for i in 0..nf {
            spent += s.price[i] * realized[j][i];
            u += ((realized[j][i] + 1.0).powf(1.0 - eta) - 1.0) / (1.0 - eta);
        }
        consumer_budget[j] = s.consumer_budget[j] + (1.0 - s.tax_income) * income[j]
            + revenue / nc as f64
            - spent;
        utility[j] = u - theta / 2.0 * consumers[j].hours;
    }
    let firm_budget: Vec<f64> = (0..nf).map(|i| s.firm_budget[i] + profit[i] - corporate[i]).collect();

    let mut welfare: f64 = utility.iter().sum();
    if cfg.government.welfare_mode == WelfareMode::Total {
        welfare += cfg.government.firm_welfare_weight * profit.iter().sum::<f64>();
    }

    Ledger {
        consumer_budget,
        firm_budget,
        inventory,
        capital,
        realized,
        production,
        export_revenue,
        investment,
        profit,
        tax_revenue: revenue,
        utility,
        welfare,
    }
}

/// Small economy with every grid at its default and a random mix of
/// economy-level switches.
pub fn random_config<R: Rng>(rng: &mut R, consumers: usize, firms: usize) -> EconomyConfig {
    let mut cfg = EconomyConfig {
        num_consumers: consumers,
        num_firms: firms,
        episode_length: 10,
        ..EconomyConfig::default()
    };
    cfg.firm.production_alpha = (0..firms).map(|_| pick(rng, &[0.2, 0.4, 0.6, 0.8])).collect();
    cfg.firm.production_a = (0..firms).map(|_| rng.gen_range(0.5..2.0)).collect();
    cfg.export.enabled = rng.gen_bool(0.5);
    cfg.export.min_price = *[500.0, 1000.0].choose(rng).unwrap();
    cfg.export.quota = *[10.0, 50.0, 100.0, 1000.0].choose(rng).unwrap();
    cfg.government.floor_tax_revenue = rng.gen_bool(0.5);
    cfg.government.welfare_mode = if rng.gen_bool(0.5) {
        WelfareMode::Total
    } else {
        WelfareMode::ConsumerOnly
    };
    cfg
}

fn pick<R: Rng>(rng: &mut R, grid: &[f64]) -> f64 {
    *grid.choose(rng).unwrap()
}

/// Arbitrary mid-episode state: budgets span tight and loose, firm budgets
/// may be negative, inventories may be empty.
pub fn random_state<R: Rng>(rng: &mut R, cfg: &EconomyConfig) -> WorldState {
    let nf = cfg.num_firms;
    let nc = cfg.num_consumers;
    WorldState {
        t: rng.gen_range(0..cfg.episode_length),
        inventory: (0..nf)
            .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..200.0) })
            .collect(),
        price: (0..nf).map(|_| pick(rng, &cfg.firm.price_grid)).collect(),
        wage: (0..nf).map(|_| pick(rng, &cfg.firm.wage_grid)).collect(),
        tax_income: pick(rng, &cfg.government.tax_grid),
        tax_corporate: pick(rng, &cfg.government.tax_grid),
        consumer_budget: (0..nc)
            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..30_000.0) })
            .collect(),
        firm_budget: (0..nf).map(|_| rng.gen_range(-500_000.0..3_000_000.0)).collect(),
        capital: (0..nf).map(|_| rng.gen_range(100.0..20_000.0)).collect(),
        overdemand: vec![false; nf],
        last_tax_revenue: 0.0,
    }
}

pub fn random_actions<R: Rng>(
    rng: &mut R,
    cfg: &EconomyConfig,
) -> (Vec<ConsumerAction>, Vec<FirmAction>, GovernmentAction) {
    let nf = cfg.num_firms;
    let consumers = (0..cfg.num_consumers)
        .map(|_| {
            let work_firm = rng.gen_bool(0.8).then(|| rng.gen_range(0..nf));
            ConsumerAction {
                consumption: (0..nf).map(|_| pick(rng, &cfg.consumer.consumption_grid)).collect(),
                work_firm,
                hours: if work_firm.is_some() {
                    pick(rng, &cfg.consumer.hours_grid)
                } else {
                    0.0
                },
            }
        })
        .collect();
    let firms = (0..nf)
        .map(|_| FirmAction {
            price: pick(rng, &cfg.firm.price_grid),
            wage: pick(rng, &cfg.firm.wage_grid),
        })
        .collect();
    let gov = GovernmentAction {
        tax_income: pick(rng, &cfg.government.tax_grid),
        tax_corporate: pick(rng, &cfg.government.tax_grid),
    };
    (consumers, firms, gov)
}

/// Largest relative mismatch between two slices, under [`close`]'s scale.
pub fn worst(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

/// Summed loss of `rows` samples as the trainer composes it, plus its
/// analytic gradient.
pub struct GradCase {
    pub net: PolicyNet<f64>,
    pub settings: LossSettings,
    pub obs: Vec<f64>,
    pub actions: Vec<u16>,
    pub old_log_prob: Vec<f64>,
    pub advantage: Vec<f64>,
    pub returns: Vec<f64>,
    pub masks: Vec<Option<Vec<bool>>>,
    pub rows: usize,
}

impl GradCase {
    fn evaluate(&self, net: &PolicyNet<f64>, grads: Option<&mut PolicyNet<f64>>) -> (f64, Vec<f64>) {
        let total = net.spec.total_logits();
        let heads = net.spec.head_sizes.len();
        let fwd = net.forward_batch(&self.obs, self.rows).unwrap();
        let weight = 1.0 / self.rows as f64;
        let mut scratch = Vec::new();
        let mut d_logits = vec![0.0; self.rows * total];
        let mut d_value = vec![0.0; self.rows];
        let mut loss = 0.0;
        let mut logp = Vec::new();
        for r in 0..self.rows {
            let out = row_loss(
                &self.settings,
                &net.spec.head_sizes,
                &self.masks,
                fwd.logits_row(r, total),
                fwd.value[r],
                &self.actions[r * heads..(r + 1) * heads],
                self.old_log_prob[r],
                self.advantage[r],
                self.returns[r],
                weight,
                &mut scratch,
                &mut d_logits[r * total..(r + 1) * total],
            );
            d_value[r] = out.d_value;
            loss += out.policy + out.value - self.settings.entropy_coeff * out.entropy;
            logp.push(out.log_prob);
        }
        if let Some(g) = grads {
            net.backward(&self.obs, &fwd, &d_logits, &d_value, g);
        }
        (loss, logp)
    }

    /// Random case whose PPO ratios and value errors sit well away from the
    /// clip bounds and the Huber threshold, where the loss is smooth.
    pub fn random<R: Rng>(rng: &mut R, algorithm: Algorithm) -> Self {
        let spec = NetSpec {
            input_dim: 5,
            hidden: 8,
            head_sizes: vec![3, 4],
        };
        let mut net = PolicyNet::<f64>::new(spec.clone(), rng);
        // Larger weights than the default init so gradients are not tiny.
        for t in net.tensors_mut() {
            for v in t.iter_mut() {
                *v += rng.gen_range(-0.3..0.3);
            }
        }
        let rows = 6;
        let obs: Vec<f64> = (0..rows * spec.input_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut masks: Vec<Option<Vec<bool>>> = vec![None; 2];
        if rng.gen_bool(0.5) {
            masks[1] = Some(vec![false, true, true, false]);
        }
        let mut actions = Vec::new();
        for _ in 0..rows {
            actions.push(rng.gen_range(0..3u16));
            actions.push(if masks[1].is_some() { rng.gen_range(1..3u16) } else { rng.gen_range(0..4u16) });
        }
        let settings = LossSettings {
            algorithm,
            clip: 0.2,
            entropy_coeff: rng.gen_range(0.0..0.5),
            value_coeff: 0.5,
        };
        let mut case = GradCase {
            net,
            settings,
            obs,
            actions,
            old_log_prob: vec![0.0; rows],
            advantage: (0..rows).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            returns: vec![0.0; rows],
            masks,
            rows,
        };
        let fwd = case.net.forward_batch(&case.obs, rows).unwrap();
        let (_, logp) = case.evaluate(&case.net, None);
        for r in 0..rows {
            let ratio = match rng.gen_range(0..3) {
                0 => rng.gen_range(0.5..0.7),
                1 => rng.gen_range(0.9..1.1),
                _ => rng.gen_range(1.35..1.6),
            };
            case.old_log_prob[r] = logp[r] - f64::ln(ratio);
            let err = if rng.gen_bool(0.5) {
                rng.gen_range(0.1..0.8)
            } else {
                rng.gen_range(1.3..3.0)
            };
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            case.returns[r] = fwd.value[r] - sign * err;
        }
        case
    }

    /// Largest `|analytic - numeric| / (|analytic| + |numeric| + floor)`
    /// over every parameter, with central differences of step `h`.
    pub fn max_error(&self, h: f64, floor: f64) -> f64 {
        let mut analytic = self.net.zeros_like();
        self.evaluate(&self.net, Some(&mut analytic));
        let a: Vec<f64> = analytic.tensors().iter().flat_map(|t| t.iter().copied()).collect();
        let mut probe = self.net.clone();
        let mut worst: f64 = 0.0;
        let mut k = 0;
        let n_tensors = probe.tensors().len();
        for ti in 0..n_tensors {
            let len = probe.tensors()[ti].len();
            for vi in 0..len {
                let orig = probe.tensors()[ti][vi];
                probe.tensors_mut()[ti][vi] = orig + h;
                let (up, _) = self.evaluate(&probe, None);
                probe.tensors_mut()[ti][vi] = orig - h;
                let (down, _) = self.evaluate(&probe, None);
                probe.tensors_mut()[ti][vi] = orig;
                let numeric = (up - down) / (2.0 * h);
                let err = (a[k] - numeric).abs() / (a[k].abs() + numeric.abs() + floor);
                worst = worst.max(err);
                k += 1;
            }
        }
        worst
    }
}

/// Closed-form curriculum values, derived from the schedule definition
/// rather than from the implementation.
pub struct ScheduleOracle<'a> {
    pub cfg: &'a CurriculumConfig,
    pub economy: &'a EconomyConfig,
}

impl ScheduleOracle<'_> {
    pub fn start(&self, a: AgentType) -> usize {
        match a {
            AgentType::Consumer => 0,
            AgentType::Firm => self.cfg.t_start_firm,
            AgentType::Government => self.cfg.t_start_government,
        }
    }

    pub fn entropy(&self, a: AgentType, t: usize) -> f64 {
        let since = t.saturating_sub(self.start(a)) as f64;
        self.cfg.entropy_initial * f64::max((-since / self.cfg.entropy_decay_rate).exp(), self.cfg.entropy_min_coeff)
    }

    pub fn theta(&self, t: usize) -> f64 {
        let frac = (t as f64 / self.cfg.theta_anneal_span as f64).min(1.0);
        self.economy.consumer.labor_disutility_theta * frac
    }

    pub fn trains(&self, a: AgentType, t: usize) -> bool {
        a == AgentType::Consumer || t > self.start(a)
    }

    /// Allowed grid values of a head whose range grows around `pinned`
    /// linearly over `[end - span, end]`, reaching the whole grid at `end`.
    fn window(grid: &[f64], pinned: f64, t: usize, end: usize, span: usize) -> Vec<f64> {
        let c = grid.iter().position(|g| *g == pinned).unwrap();
        let reach = c.max(grid.len() - 1 - c);
        let begin = end - span;
        let k = if t <= begin {
            0
        } else if t >= end {
            reach
        } else {
            (t - begin) * reach / span
        };
        grid.iter()
            .enumerate()
            .filter(|(i, _)| i.abs_diff(c) <= k)
            .map(|(_, g)| *g)
            .collect()
    }

    pub fn prices(&self, t: usize) -> Vec<f64> {
        let pinned = self.cfg.pinned_price.unwrap_or(self.economy.firm.initial_price);
        Self::window(&self.economy.firm.price_grid, pinned, t, self.cfg.t_start_firm, self.cfg.firm_anneal_span)
    }

    pub fn wages(&self, t: usize) -> Vec<f64> {
        Self::window(
            &self.economy.firm.wage_grid,
            self.cfg.pinned_wage,
            t,
            self.cfg.t_start_firm,
            self.cfg.firm_anneal_span,
        )
    }

    pub fn taxes(&self, t: usize) -> Vec<f64> {
        Self::window(
            &self.economy.government.tax_grid,
            0.0,
            t,
            self.cfg.t_start_government,
            self.cfg.government_anneal_span,
        )
    }
}

/// Twenty updates around every boundary of the schedule.
pub fn probes(cfg: &RunConfig) -> Vec<usize> {
    let c = &cfg.curriculum;
    let firm_open = c.t_start_firm - c.firm_anneal_span;
    let gov_open = c.t_start_government - c.government_anneal_span;
    let mut t = vec![
        0,
        1,
        firm_open,
        firm_open + 1,
        (firm_open + c.t_start_firm) / 2,
        c.t_start_firm - 1,
        c.t_start_firm,
        c.t_start_firm + 1,
        gov_open,
        gov_open + 1,
        (gov_open + c.t_start_government) / 2,
        c.t_start_government - 1,
        c.t_start_government,
        c.t_start_government + 1,
        c.theta_anneal_span / 2,
        c.theta_anneal_span,
        c.theta_anneal_span + 1,
    ];
    t.extend((1..=3).map(|k| c.t_start_government + k * c.entropy_decay_rate as usize));
    t
}

/// Grid values a mask allows.
pub fn allowed(grid: &[f64], mask: &Option<Vec<bool>>) -> Vec<f64> {
    match mask {
        None => grid.to_vec(),
        Some(m) => grid.iter().zip(m).filter(|(_, ok)| **ok).map(|(g, _)| *g).collect(),
    }
}
