//! Best-response measurements over the meta-game of agent types, and fixed
//! tax baselines.
//!
//! A best response retrains the shared policy of one agent type while the
//! other types stay frozen. The improvement it finds bounds how far the
//! current profile is from an equilibrium.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentType, PerType};
use crate::config::grid_index;
use crate::curriculum::Gates;
use crate::error::{Error, Result};
use crate::io::Checkpoint;
use crate::neural::PolicyNet;
use crate::trainer::{initial_nets, GovernmentControl, RolloutStats, Stream, Trainer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponseOptions {
    pub agent: AgentType,
    pub updates: usize,
    pub seed: u64,
    /// Evaluation episodes before and after; defaults to the config value.
    pub eval_episodes: Option<usize>,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponseReport {
    pub agent: AgentType,
    pub checkpoint_update: usize,
    pub updates: usize,
    pub seed: u64,
    pub eval_episodes: usize,
    /// Mean episode reward per agent of the trained type, raw units.
    pub reward_initial: f64,
    pub reward_before: f64,
    pub reward_after: f64,
    pub improvement: f64,
    /// `reward_before - reward_initial`: the gain made during training.
    pub training_gain: f64,
    /// `improvement / |training_gain|`.
    pub fraction: f64,
    /// Set when the retrained policy evaluates worse than the start.
    pub negative: bool,
    /// Whether the frozen opponents were left bit-identical.
    pub opponents_unchanged: bool,
}

fn refs(nets: &PerType<PolicyNet<f32>>) -> PerType<&PolicyNet<f32>> {
    PerType {
        consumer: &nets.consumer,
        firm: &nets.firm,
        government: &nets.government,
    }
}

fn only(agent: AgentType) -> Gates {
    Gates {
        consumer: agent == AgentType::Consumer,
        firm: agent == AgentType::Firm,
        government: agent == AgentType::Government,
    }
}

/// Retrains `opts.agent` against frozen opponents under the terminal
/// schedule (full action ranges, final disutility, minimum entropy).
///
/// Rewards before and after are measured with stochastic policies on the
/// same evaluation episodes. The untrained networks of the run are rebuilt
/// from its seed and evaluated on the same episodes to obtain the gain made
/// during training.
pub fn best_response(ck: &Checkpoint, opts: &BestResponseOptions) -> Result<BestResponseReport> {
    let mut trainer = Trainer::from_checkpoint(ck.clone())?;
    trainer.set_workers(opts.workers)?;
    let schedule = trainer.curriculum().terminal();
    let episodes = opts.eval_episodes.unwrap_or(trainer.config.training.eval_episodes);
    let agent = opts.agent;
    let eval_seed = opts.seed;
    let reward = |s: RolloutStats| *s.episode_reward.get(agent);

    let initial = initial_nets(&trainer.config, trainer.seed);
    let reward_initial = reward(trainer.evaluate_nets(
        refs(&initial),
        &schedule,
        GovernmentControl::Policy,
        eval_seed,
        episodes,
    )?);
    let reward_before = reward(trainer.evaluate(&schedule, GovernmentControl::Policy, eval_seed, episodes)?);

    let frozen = trainer.nets.clone();
    let replicas = trainer.config.training.num_replicas;
    for k in 0..opts.updates {
        let batch = trainer.collect(
            &schedule,
            GovernmentControl::Policy,
            (opts.seed, Stream::BestResponse, k as u64),
            replicas,
        )?;
        trainer.update_types(&batch, &schedule, only(agent))?;
    }
    let reward_after = reward(trainer.evaluate(&schedule, GovernmentControl::Policy, eval_seed, episodes)?);

    let opponents_unchanged = AgentType::ALL
        .iter()
        .filter(|a| **a != agent)
        .all(|a| trainer.nets.get(*a) == frozen.get(*a));
    let improvement = reward_after - reward_before;
    let training_gain = reward_before - reward_initial;
    let tiny = 1e-12 * reward_before.abs().max(1.0);
    Ok(BestResponseReport {
        agent,
        checkpoint_update: ck.update,
        updates: opts.updates,
        seed: opts.seed,
        eval_episodes: episodes,
        reward_initial,
        reward_before,
        reward_after,
        improvement,
        training_gain,
        fraction: improvement / training_gain.abs().max(tiny),
        negative: improvement < 0.0,
        opponents_unchanged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tax_income: f64,
    pub tax_corporate: f64,
    /// Mean episode social welfare.
    pub welfare: f64,
    pub consumer_reward: f64,
    pub firm_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub checkpoint_update: usize,
    pub episodes: usize,
    pub retrain_updates: usize,
    pub rows: Vec<SweepRow>,
    /// Index into `rows` of the highest welfare.
    pub best: usize,
    /// The checkpoint's own government policy on the same episodes.
    pub rl_government: SweepRow,
    /// `(rl - best_fixed) / |best_fixed|`.
    pub rl_relative_to_best: f64,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("policy,tax_income,tax_corporate,welfare,consumer_reward,firm_reward\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "fixed,{},{},{},{},{}",
                r.tax_income, r.tax_corporate, r.welfare, r.consumer_reward, r.firm_reward
            );
        }
        let r = &self.rl_government;
        let _ = writeln!(
            out,
            "rl,{},{},{},{},{}",
            r.tax_income, r.tax_corporate, r.welfare, r.consumer_reward, r.firm_reward
        );
        out
    }
}

/// The grid `{0.2, 0.4, 0.6, 0.8}` squared.
pub fn default_sweep_rates() -> Vec<(f64, f64)> {
    let levels = [0.2, 0.4, 0.6, 0.8];
    levels
        .iter()
        .flat_map(|&a| levels.iter().map(move |&b| (a, b)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub rates: Vec<(f64, f64)>,
    pub seed: u64,
    pub episodes: Option<usize>,
    /// Retrain consumers and firms against each fixed rate for this many
    /// updates before evaluating (0 evaluates the checkpoint policies).
    pub retrain_updates: usize,
    pub workers: usize,
}

/// Replaces the government by constant rates and reports mean welfare for
/// every rate pair, next to the checkpoint's own government.
pub fn fixed_tax_sweep(ck: &Checkpoint, opts: &SweepOptions) -> Result<SweepReport> {
    let grid = &ck.config.economy.government.tax_grid;
    for &(ti, tc) in &opts.rates {
        if grid_index(grid, ti).is_none() || grid_index(grid, tc).is_none() {
            return Err(Error::InvalidAction(format!(
                "tax pair ({ti}, {tc}) is not on the tax grid"
            )));
        }
    }
    if opts.rates.is_empty() {
        return Err(Error::InvalidAction("no tax rates given".into()));
    }
    let mut trainer = Trainer::from_checkpoint(ck.clone())?;
    trainer.set_workers(opts.workers)?;
    let schedule = trainer.curriculum().terminal();
    let episodes = opts.episodes.unwrap_or(trainer.config.training.eval_episodes);
    let replicas = trainer.config.training.num_replicas;
    let base = trainer.nets.clone();
    let base_optim = trainer.optim.clone();
    let row = |ti: f64, tc: f64, s: &RolloutStats| SweepRow {
        tax_income: ti,
        tax_corporate: tc,
        welfare: s.episode_reward.government,
        consumer_reward: s.episode_reward.consumer,
        firm_reward: s.episode_reward.firm,
    };

    let mut rows = Vec::with_capacity(opts.rates.len());
    for (k, &(ti, tc)) in opts.rates.iter().enumerate() {
        let control = GovernmentControl::Fixed {
            tax_income: ti,
            tax_corporate: tc,
        };
        trainer.nets = base.clone();
        trainer.optim = base_optim.clone();
        for u in 0..opts.retrain_updates {
            let counter = ((k as u64) << 32) | u as u64;
            let batch = trainer.collect(&schedule, control, (opts.seed, Stream::Sweep, counter), replicas)?;
            let gates = Gates {
                consumer: true,
                firm: true,
                government: false,
            };
            trainer.update_types(&batch, &schedule, gates)?;
        }
        let stats = trainer.evaluate(&schedule, control, opts.seed, episodes)?;
        rows.push(row(ti, tc, &stats));
    }
    trainer.nets = base;
    let rl = trainer.evaluate(&schedule, GovernmentControl::Policy, opts.seed, episodes)?;
    let rl_government = row(rl.mean_tax_income, rl.mean_tax_corporate, &rl);

    let best = rows
        .iter()
        .enumerate()
        .fold(0, |b, (i, r)| if r.welfare > rows[b].welfare { i } else { b });
    let best_welfare = rows[best].welfare;
    Ok(SweepReport {
        checkpoint_update: ck.update,
        episodes,
        retrain_updates: opts.retrain_updates,
        rl_relative_to_best: (rl_government.welfare - best_welfare) / best_welfare.abs().max(1e-12),
        rows,
        best,
        rl_government,
    })
}

/// Parses `"0.2:0.4,0.6:0.6"` into rate pairs; `"default"` gives
/// [`default_sweep_rates`].
pub fn parse_rates(text: &str) -> Result<Vec<(f64, f64)>> {
    if text.trim() == "default" {
        return Ok(default_sweep_rates());
    }
    text.split(',')
        .map(|pair| {
            let bad = || Error::InvalidAction(format!("cannot parse tax pair `{pair}` (expected income:corporate)"));
            let (a, b) = pair.trim().split_once(':').ok_or_else(bad)?;
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            Ok((a, b))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn tiny_checkpoint() -> Checkpoint {
        let mut cfg = RunConfig::default();
        cfg.economy.num_consumers = 3;
        cfg.economy.num_firms = 2;
        cfg.economy.episode_length = 4;
        cfg.training.hidden_width = 8;
        cfg.training.num_replicas = 2;
        cfg.training.eval_episodes = 3;
        Trainer::new(cfg, 7).unwrap().checkpoint()
    }

    #[test]
    fn default_rates_cover_paper_grid() {
        let r = default_sweep_rates();
        assert_eq!(r.len(), 16);
        assert!(r.contains(&(0.2, 0.8)) && r.contains(&(0.8, 0.2)));
    }

    #[test]
    fn parse_rates_examples() {
        assert_eq!(parse_rates("0.2:0.4, 0.6:0.6").unwrap(), vec![(0.2, 0.4), (0.6, 0.6)]);
        assert!(parse_rates("0.2").is_err());
        assert_eq!(parse_rates("default").unwrap().len(), 16);
    }

    #[test]
    fn zero_updates_changes_nothing() {
        let ck = tiny_checkpoint();
        let opts = BestResponseOptions {
            agent: AgentType::Firm,
            updates: 0,
            seed: 3,
            eval_episodes: None,
            workers: 1,
        };
        let r = best_response(&ck, &opts).unwrap();
        assert_eq!(r.improvement, 0.0);
        assert!(r.opponents_unchanged);
        // nothing has been trained yet either
        assert_eq!(r.training_gain, 0.0);
    }

    #[test]
    fn best_response_keeps_opponents() {
        let ck = tiny_checkpoint();
        let opts = BestResponseOptions {
            agent: AgentType::Consumer,
            updates: 2,
            seed: 3,
            eval_episodes: Some(2),
            workers: 1,
        };
        let r = best_response(&ck, &opts).unwrap();
        assert!(r.opponents_unchanged);
        assert!(r.improvement.is_finite());
    }

    #[test]
    fn sweep_rows_and_off_grid() {
        let ck = tiny_checkpoint();
        let opts = SweepOptions {
            rates: vec![(0.0, 0.0), (0.2, 0.8)],
            seed: 1,
            episodes: Some(2),
            retrain_updates: 0,
            workers: 1,
        };
        let rep = fixed_tax_sweep(&ck, &opts).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert_eq!(rep.to_csv().lines().count(), 4);
        let bad = SweepOptions { rates: vec![(0.3, 0.2)], ..opts };
        assert!(matches!(fixed_tax_sweep(&ck, &bad), Err(Error::InvalidAction(_))));
    }
}
