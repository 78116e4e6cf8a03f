use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agent::{AgentType, PerType};
use crate::curriculum::Schedule;
use crate::economy::{ConsumerAction, Economy, FirmAction, GovernmentAction, StepOutcome, WorldState};
use crate::error::{Error, Result};
use crate::io::rollout::{EpisodeRecord, StepRecord};
use crate::neural::{entropy, sample, ActionDistribution, HeadMask, PolicyNet};
use crate::obs::ObsEncoder;

/// Who sets the tax rates during a rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GovernmentControl {
    Policy,
    /// Constant rates, also installed in the initial state.
    Fixed { tax_income: f64, tax_corporate: f64 },
}

/// Rollout samples of one agent type, stored row-major.
///
/// Rows are ordered by replica, then timestep, then agent, so row
/// `(replica * steps + t) * agents + agent`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TypeBatch {
    pub width: usize,
    pub heads: usize,
    pub agents: usize,
    pub steps: usize,
    pub replicas: usize,
    pub obs: Vec<f32>,
    pub actions: Vec<u16>,
    pub log_prob: Vec<f32>,
    pub value: Vec<f32>,
    /// Rewards after division by the type's reward scale.
    pub reward: Vec<f32>,
    /// Entropy of the sampling distribution at each row.
    pub entropy: Vec<f32>,
}

impl TypeBatch {
    fn new(width: usize, heads: usize, agents: usize, steps: usize) -> Self {
        Self {
            width,
            heads,
            agents,
            steps,
            ..Self::default()
        }
    }

    pub fn rows(&self) -> usize {
        self.log_prob.len()
    }

    pub fn row(&self, replica: usize, t: usize, agent: usize) -> usize {
        (replica * self.steps + t) * self.agents + agent
    }

    fn append(&mut self, other: TypeBatch) {
        self.obs.extend(other.obs);
        self.actions.extend(other.actions);
        self.log_prob.extend(other.log_prob);
        self.value.extend(other.value);
        self.reward.extend(other.reward);
        self.entropy.extend(other.entropy);
        self.replicas += 1;
    }
}

/// Economy-level averages over every replica and timestep of a rollout.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RolloutStats {
    pub episodes: usize,
    /// Mean undiscounted episode return per agent, raw units.
    pub episode_reward: PerType<f64>,
    pub mean_price: f64,
    pub mean_wage: f64,
    pub mean_tax_income: f64,
    pub mean_tax_corporate: f64,
    /// Units consumed per consumer per step.
    pub mean_consumption: f64,
    pub mean_hours: f64,
    pub mean_export: f64,
    /// Fraction of firm episodes ending with a negative budget.
    pub no_ponzi_rate: f64,
    pub mean_entropy: PerType<f64>,
}

impl RolloutStats {
    fn add(&mut self, o: &RolloutStats) {
        self.episodes += o.episodes;
        for a in AgentType::ALL {
            *self.episode_reward.get_mut(a) += o.episode_reward.get(a);
            *self.mean_entropy.get_mut(a) += o.mean_entropy.get(a);
        }
        self.mean_price += o.mean_price;
        self.mean_wage += o.mean_wage;
        self.mean_tax_income += o.mean_tax_income;
        self.mean_tax_corporate += o.mean_tax_corporate;
        self.mean_consumption += o.mean_consumption;
        self.mean_hours += o.mean_hours;
        self.mean_export += o.mean_export;
        self.no_ponzi_rate += o.no_ponzi_rate;
    }

    fn scale(&mut self, k: f64) {
        for a in AgentType::ALL {
            *self.episode_reward.get_mut(a) *= k;
            *self.mean_entropy.get_mut(a) *= k;
        }
        self.mean_price *= k;
        self.mean_wage *= k;
        self.mean_tax_income *= k;
        self.mean_tax_corporate *= k;
        self.mean_consumption *= k;
        self.mean_hours *= k;
        self.mean_export *= k;
        self.no_ponzi_rate *= k;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBatch {
    pub types: PerType<TypeBatch>,
    pub stats: RolloutStats,
}

/// Read-only inputs of a rollout phase.
pub struct RolloutContext<'a> {
    pub economy: &'a Economy,
    pub encoder: &'a ObsEncoder,
    pub nets: PerType<&'a PolicyNet<f32>>,
    pub schedule: &'a Schedule,
    pub government: GovernmentControl,
    pub reward_scale: PerType<f64>,
    /// Keep per-row samples; evaluation only needs the statistics.
    pub store: bool,
}

struct Scratch {
    obs: Vec<f32>,
    idx: Vec<usize>,
}

#[allow(clippy::too_many_arguments)]
fn act<R: Rng>(
    net: &PolicyNet<f32>,
    masks: &[HeadMask],
    obs: &[f32],
    rows: usize,
    rng: &mut R,
    out: &mut TypeBatch,
    store: bool,
    actions: &mut Vec<Vec<usize>>,
    entropy_sum: &mut f64,
) -> Result<()> {
    let fwd = net.forward_batch(obs, rows)?;
    let total = net.spec.total_logits();
    actions.clear();
    for r in 0..rows {
        let dist = ActionDistribution::from_logits(fwd.logits_row(r, total), &net.spec.head_sizes, masks)?;
        let s = sample(&dist, rng);
        let h = entropy(&dist);
        *entropy_sum += f64::from(h);
        if store {
            out.actions.extend(s.actions.iter().map(|&a| a as u16));
            out.log_prob.push(s.log_prob);
            out.value.push(fwd.value[r]);
            out.entropy.push(h);
        }
        actions.push(s.actions);
    }
    if store {
        out.obs.extend_from_slice(obs);
    }
    Ok(())
}

fn record_step(s: &WorldState, consumers: &[ConsumerAction], out: &StepOutcome) -> StepRecord {
    StepRecord {
        t: s.t,
        price: s.price.clone(),
        wage: s.wage.clone(),
        tax_income: s.tax_income,
        tax_corporate: s.tax_corporate,
        inventory: s.inventory.clone(),
        capital: s.capital.clone(),
        firm_budget: s.firm_budget.clone(),
        consumer_budget: s.consumer_budget.clone(),
        consumption: out.realized_consumption.clone(),
        hours: consumers.iter().map(|a| a.hours).collect(),
        employer: consumers.iter().map(|a| a.work_firm).collect(),
        production: out.production.clone(),
        export_sold: out.export_sold.clone(),
        profit: out.profit.clone(),
        utility: out.utility.clone(),
        tax_revenue: out.tax_revenue,
        welfare: out.welfare,
    }
}

/// Simulates one full episode of one replica.
pub fn run_episode(
    ctx: &RolloutContext<'_>,
    rng: &mut ChaCha8Rng,
    record: Option<&mut Vec<StepRecord>>,
) -> Result<(PerType<TypeBatch>, RolloutStats)> {
    let cfg = ctx.economy.config();
    let layout = ctx.encoder.layout();
    let (nc, nf) = (cfg.num_consumers, cfg.num_firms);
    let horizon = cfg.episode_length;
    let store = ctx.store;
    let mut batch = PerType::from_fn(|a| {
        TypeBatch::new(layout.width(a), a.head_sizes(cfg).len(), a.count(cfg), horizon)
    });
    let mut state = match ctx.government {
        GovernmentControl::Policy => ctx.economy.reset(),
        GovernmentControl::Fixed { tax_income, tax_corporate } => {
            ctx.economy.reset_with_taxes(tax_income, tax_corporate)
        }
    };
    let mut scratch = Scratch {
        obs: Vec::new(),
        idx: Vec::new(),
    };
    let mut picks: Vec<Vec<usize>> = Vec::new();
    let mut stats = RolloutStats {
        episodes: 1,
        ..RolloutStats::default()
    };
    let mut reward_sum = PerType::<f64>::default();
    let mut entropy_sum = PerType::<f64>::default();
    let mut records = record;
    let theta = ctx.schedule.theta;

    for _ in 0..horizon {
        // consumers
        let w = layout.consumer.width;
        scratch.obs.resize(nc * w, 0.0);
        for j in 0..nc {
            ctx.encoder.write_consumer(&state, j, theta, &mut scratch.obs[j * w..(j + 1) * w])?;
        }
        act(
            ctx.nets.consumer,
            &ctx.schedule.masks.consumer,
            &scratch.obs,
            nc,
            rng,
            &mut batch.consumer,
            store,
            &mut picks,
            &mut entropy_sum.consumer,
        )?;
        let consumers: Vec<ConsumerAction> =
            picks.iter().map(|p| ConsumerAction::from_indices(cfg, p)).collect();

        // firms
        let w = layout.firm.width;
        scratch.obs.resize(nf * w, 0.0);
        for i in 0..nf {
            ctx.encoder.write_firm(&state, i, &mut scratch.obs[i * w..(i + 1) * w])?;
        }
        act(
            ctx.nets.firm,
            &ctx.schedule.masks.firm,
            &scratch.obs,
            nf,
            rng,
            &mut batch.firm,
            store,
            &mut picks,
            &mut entropy_sum.firm,
        )?;
        let firms: Vec<FirmAction> = picks.iter().map(|p| FirmAction::from_indices(cfg, p)).collect();

        // government
        let gov = match ctx.government {
            GovernmentControl::Policy => {
                let w = layout.government.width;
                scratch.obs.resize(w, 0.0);
                ctx.encoder.write_government(&state, &mut scratch.obs);
                act(
                    ctx.nets.government,
                    &ctx.schedule.masks.government,
                    &scratch.obs,
                    1,
                    rng,
                    &mut batch.government,
                    store,
                    &mut picks,
                    &mut entropy_sum.government,
                )?;
                scratch.idx.clone_from(&picks[0]);
                GovernmentAction::from_indices(cfg, &scratch.idx)
            }
            GovernmentControl::Fixed { tax_income, tax_corporate } => GovernmentAction {
                tax_income,
                tax_corporate,
            },
        };

        let (next, out) = ctx.economy.step(&state, &consumers, &firms, &gov, theta)?;

        let scale = &ctx.reward_scale;
        if store {
            for u in &out.utility {
                batch.consumer.reward.push((u / scale.consumer) as f32);
            }
            for r in &out.firm_reward {
                batch.firm.reward.push((r / scale.firm) as f32);
            }
            if ctx.government == GovernmentControl::Policy {
                batch.government.reward.push((out.welfare / scale.government) as f32);
            }
        }
        reward_sum.consumer += out.utility.iter().sum::<f64>();
        reward_sum.firm += out.firm_reward.iter().sum::<f64>();
        reward_sum.government += out.welfare;

        stats.mean_price += state.price.iter().sum::<f64>() / nf as f64;
        stats.mean_wage += state.wage.iter().sum::<f64>() / nf as f64;
        stats.mean_tax_income += state.tax_income;
        stats.mean_tax_corporate += state.tax_corporate;
        stats.mean_consumption +=
            out.realized_consumption.iter().flatten().sum::<f64>() / nc as f64;
        stats.mean_hours += consumers.iter().map(|a| a.hours).sum::<f64>() / nc as f64;
        stats.mean_export += out.export_sold.iter().sum::<f64>() / nf as f64;
        stats.no_ponzi_rate += out.no_ponzi_violation.iter().filter(|v| **v).count() as f64 / nf as f64;

        if let Some(rec) = records.as_deref_mut() {
            rec.push(record_step(&state, &consumers, &out));
        }
        state = next;
    }

    let h = horizon as f64;
    stats.episode_reward = PerType {
        consumer: reward_sum.consumer / nc as f64,
        firm: reward_sum.firm / nf as f64,
        government: reward_sum.government,
    };
    stats.mean_entropy = PerType {
        consumer: entropy_sum.consumer / (h * nc as f64),
        firm: entropy_sum.firm / (h * nf as f64),
        government: entropy_sum.government / h,
    };
    for v in [
        &mut stats.mean_price,
        &mut stats.mean_wage,
        &mut stats.mean_tax_income,
        &mut stats.mean_tax_corporate,
        &mut stats.mean_consumption,
        &mut stats.mean_hours,
        &mut stats.mean_export,
    ] {
        *v /= h;
    }
    for b in [&mut batch.consumer, &mut batch.firm, &mut batch.government] {
        b.replicas = 1;
    }
    Ok((batch, stats))
}

/// Runs `replicas` episodes, replica `r` drawing from `rng_for(r)`, on the
/// current rayon pool. Results are assembled in replica order, so they do
/// not depend on how replicas were scheduled across threads.
pub fn collect_rollouts(
    ctx: &RolloutContext<'_>,
    replicas: usize,
    rng_for: impl Fn(usize) -> ChaCha8Rng + Sync,
) -> Result<RolloutBatch> {
    let episodes: Vec<Result<(PerType<TypeBatch>, RolloutStats)>> = (0..replicas)
        .into_par_iter()
        .map(|r| run_episode(ctx, &mut rng_for(r), None))
        .collect();
    let mut out = RolloutBatch::default();
    for (r, ep) in episodes.into_iter().enumerate() {
        let (types, stats) = ep?;
        if r == 0 {
            for a in AgentType::ALL {
                let t = types.get(a);
                *out.types.get_mut(a) = TypeBatch::new(t.width, t.heads, t.agents, t.steps);
            }
        }
        out.types.consumer.append(types.consumer);
        out.types.firm.append(types.firm);
        out.types.government.append(types.government);
        out.stats.add(&stats);
    }
    if replicas == 0 {
        return Err(Error::Shape("rollout needs at least one replica".into()));
    }
    out.stats.scale(1.0 / replicas as f64);
    out.stats.episodes = replicas;
    Ok(out)
}

/// Records one episode step by step for export.
pub fn record_episode(ctx: &RolloutContext<'_>, rng: &mut ChaCha8Rng) -> Result<EpisodeRecord> {
    let mut steps = Vec::with_capacity(ctx.economy.config().episode_length);
    let (_, stats) = run_episode(ctx, rng, Some(&mut steps))?;
    Ok(EpisodeRecord::new(ctx.economy.config().clone(), steps, stats.episode_reward))
}
