//! Replica-parallel training loop.
//!
//! Every update collects one full episode from each replica, then updates
//! the shared network of each agent type whose training gate is open. The
//! rollout phase only borrows the networks immutably and the update phase
//! borrows them mutably, so the two phases cannot overlap.

pub mod bandit;
pub mod rollout;
pub mod update;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{AgentType, PerType};
use crate::config::RunConfig;
use crate::curriculum::{Curriculum, Gates, Schedule};
use crate::economy::Economy;
use crate::error::{Error, Result};
use crate::io::checkpoint::CHECKPOINT_FORMAT;
use crate::io::{Checkpoint, EpisodeRecord, MetricsRow, MetricsWriter, RunManifest};
use crate::neural::{NetSpec, PolicyNet};
use crate::obs::ObsEncoder;
use crate::rl::{Adam, LossSettings};

pub use rollout::{collect_rollouts, GovernmentControl, RolloutBatch, RolloutContext, RolloutStats, TypeBatch};
pub use update::{batch_gradient, batch_returns, update_type, UpdateSettings, UpdateStats};

/// Independent random streams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 0,
    Train = 1,
    Eval = 2,
    BestResponse = 3,
    Export = 4,
    Sweep = 5,
}

/// Counter-based generator for `(seed, stream, counter, replica)`.
///
/// The key depends on seed and stream, the ChaCha stream id on the counter
/// and the replica selects a disjoint block of the keystream, so draws do
/// not depend on which thread runs the replica.
pub fn stream_rng(seed: u64, stream: Stream, counter: u64, replica: usize) -> ChaCha8Rng {
    let key = seed ^ (stream as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(counter);
    rng.set_word_pos(u128::from(replica as u64) << 40);
    rng
}

pub fn net_spec(config: &RunConfig, agent: AgentType) -> NetSpec {
    let layout = crate::obs::ObsLayout::new(&config.economy);
    NetSpec {
        input_dim: layout.width(agent),
        hidden: config.training.hidden_width,
        head_sizes: agent.head_sizes(&config.economy),
    }
}

/// Freshly initialized networks for `seed`.
pub fn initial_nets(config: &RunConfig, seed: u64) -> PerType<PolicyNet<f32>> {
    PerType::from_fn(|a| {
        let mut rng = stream_rng(seed, Stream::Init, a.index() as u64, 0);
        PolicyNet::new(net_spec(config, a), &mut rng)
    })
}

fn learning_rate(config: &RunConfig, agent: AgentType) -> f64 {
    match agent {
        AgentType::Government => config.training.learning_rate_government,
        _ => config.training.learning_rate,
    }
}

pub fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Runtime(format!("cannot start worker pool: {e}")))
}

pub struct Trainer {
    pub config: RunConfig,
    pub seed: u64,
    /// Completed updates.
    pub update: usize,
    pub nets: PerType<PolicyNet<f32>>,
    pub optim: PerType<Adam<f32>>,
    economy: Economy,
    encoder: ObsEncoder,
    curriculum: Curriculum,
    pool: rayon::ThreadPool,
}

impl Trainer {
    pub fn new(config: RunConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let nets = initial_nets(&config, seed);
        let optim = PerType::from_fn(|a| Adam::new(nets.get(a), learning_rate(&config, a)));
        Self::assemble(config, seed, 0, nets, optim)
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        ck.validate()?;
        Self::assemble(ck.config, ck.seed, ck.update, ck.nets, ck.optim)
    }

    fn assemble(
        config: RunConfig,
        seed: u64,
        update: usize,
        nets: PerType<PolicyNet<f32>>,
        optim: PerType<Adam<f32>>,
    ) -> Result<Self> {
        let economy = Economy::new(config.economy.clone())?;
        let encoder = ObsEncoder::new(&economy);
        let curriculum = Curriculum::new(&config.curriculum, &config.economy)?;
        let pool = build_pool(config.training.workers)?;
        Ok(Self {
            config,
            seed,
            update,
            nets,
            optim,
            economy,
            encoder,
            curriculum,
            pool,
        })
    }

    /// Replaces the worker pool; results do not depend on the count.
    pub fn set_workers(&mut self, workers: usize) -> Result<()> {
        self.pool = build_pool(workers)?;
        self.config.training.workers = workers;
        Ok(())
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn economy(&self) -> &Economy {
        &self.economy
    }

    pub fn curriculum(&self) -> &Curriculum {
        &self.curriculum
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT,
            update: self.update,
            seed: self.seed,
            config: self.config.clone(),
            nets: self.nets.clone(),
            optim: self.optim.clone(),
        }
    }

    fn reward_scale(&self) -> PerType<f64> {
        let t = &self.config.training;
        PerType {
            consumer: t.consumer_reward_scale,
            firm: t.firm_reward_scale,
            government: t.government_reward_scale,
        }
    }

    /// Runs `replicas` episodes with replica `r` seeded from
    /// `(seed, stream, counter, r)`.
    pub fn collect_with(
        &self,
        nets: PerType<&PolicyNet<f32>>,
        schedule: &Schedule,
        government: GovernmentControl,
        rng: (u64, Stream, u64),
        replicas: usize,
        store: bool,
    ) -> Result<RolloutBatch> {
        let ctx = RolloutContext {
            economy: &self.economy,
            encoder: &self.encoder,
            nets,
            schedule,
            government,
            reward_scale: self.reward_scale(),
            store,
        };
        let (seed, stream, counter) = rng;
        self.pool
            .install(|| collect_rollouts(&ctx, replicas, |r| stream_rng(seed, stream, counter, r)))
    }

    pub fn collect(
        &self,
        schedule: &Schedule,
        government: GovernmentControl,
        rng: (u64, Stream, u64),
        replicas: usize,
    ) -> Result<RolloutBatch> {
        let nets = PerType {
            consumer: &self.nets.consumer,
            firm: &self.nets.firm,
            government: &self.nets.government,
        };
        self.collect_with(nets, schedule, government, rng, replicas, true)
    }

    fn update_settings(&self, agent: AgentType, schedule: &Schedule) -> UpdateSettings {
        let t = &self.config.training;
        UpdateSettings {
            loss: LossSettings {
                algorithm: t.algorithm,
                clip: t.ppo_clip,
                entropy_coeff: *schedule.entropy.get(agent),
                value_coeff: t.value_loss_coeff,
            },
            gamma: agent.discount(&self.config.economy),
            epochs: t.ppo_epochs,
            max_grad_norm: t.max_grad_norm,
        }
    }

    /// Updates every type whose gate is open. Closed gates leave the network
    /// and optimizer untouched.
    pub fn update_types(
        &mut self,
        batch: &RolloutBatch,
        schedule: &Schedule,
        gates: Gates,
    ) -> Result<PerType<Option<UpdateStats>>> {
        let mut out = PerType::default();
        for a in AgentType::ALL {
            if !gates.open(a) || batch.types.get(a).rows() == 0 {
                continue;
            }
            let settings = self.update_settings(a, schedule);
            let update = self.update;
            let net = self.nets.get_mut(a);
            let adam = self.optim.get_mut(a);
            let masks = schedule.masks.get(a);
            let stats = self
                .pool
                .install(|| update_type(a, update, net, adam, batch.types.get(a), masks, &settings))?;
            *out.get_mut(a) = Some(stats);
        }
        Ok(out)
    }

    /// One curriculum-driven training iteration at the current update.
    pub fn step(&mut self) -> Result<MetricsRow> {
        let t = self.update;
        let schedule = self.curriculum.schedule(t);
        let replicas = self.config.training.num_replicas;
        let batch = self.collect(
            &schedule,
            GovernmentControl::Policy,
            (self.seed, Stream::Train, t as u64),
            replicas,
        )?;
        let stats = self.update_types(&batch, &schedule, schedule.gates)?;
        self.update += 1;
        Ok(metrics_row(t, &schedule, &batch.stats, &stats))
    }

    /// Stochastic-policy evaluation over `episodes` episodes.
    pub fn evaluate_nets(
        &self,
        nets: PerType<&PolicyNet<f32>>,
        schedule: &Schedule,
        government: GovernmentControl,
        eval_seed: u64,
        episodes: usize,
    ) -> Result<RolloutStats> {
        let batch = self.collect_with(
            nets,
            schedule,
            government,
            (self.seed, Stream::Eval, eval_seed),
            episodes,
            false,
        )?;
        Ok(batch.stats)
    }

    pub fn evaluate(
        &self,
        schedule: &Schedule,
        government: GovernmentControl,
        eval_seed: u64,
        episodes: usize,
    ) -> Result<RolloutStats> {
        let nets = PerType {
            consumer: &self.nets.consumer,
            firm: &self.nets.firm,
            government: &self.nets.government,
        };
        self.evaluate_nets(nets, schedule, government, eval_seed, episodes)
    }

    /// Records one episode under `schedule` for export.
    pub fn record_episode(
        &self,
        schedule: &Schedule,
        government: GovernmentControl,
        seed: u64,
    ) -> Result<EpisodeRecord> {
        let ctx = RolloutContext {
            economy: &self.economy,
            encoder: &self.encoder,
            nets: PerType {
                consumer: &self.nets.consumer,
                firm: &self.nets.firm,
                government: &self.nets.government,
            },
            schedule,
            government,
            reward_scale: self.reward_scale(),
            store: false,
        };
        let mut rng = stream_rng(self.seed, Stream::Export, seed, 0);
        rollout::record_episode(&ctx, &mut rng)
    }
}

pub fn metrics_row(
    update: usize,
    schedule: &Schedule,
    stats: &RolloutStats,
    updates: &PerType<Option<UpdateStats>>,
) -> MetricsRow {
    let pick = |f: fn(&UpdateStats) -> f64| PerType::from_fn(|a| updates.get(a).as_ref().map_or(0.0, f));
    MetricsRow {
        update,
        theta: schedule.theta,
        trained: PerType::from_fn(|a| updates.get(a).is_some()),
        entropy_coeff: schedule.entropy,
        reward: stats.episode_reward,
        mean_price: stats.mean_price,
        mean_wage: stats.mean_wage,
        tax_income: stats.mean_tax_income,
        tax_corporate: stats.mean_tax_corporate,
        mean_consumption: stats.mean_consumption,
        mean_hours: stats.mean_hours,
        mean_export: stats.mean_export,
        no_ponzi_rate: stats.no_ponzi_rate,
        entropy: stats.mean_entropy,
        policy_loss: pick(|s| s.policy_loss),
        value_loss: pick(|s| s.value_loss),
        grad_norm: pick(|s| s.grad_norm),
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub out_dir: PathBuf,
    /// Resume from this checkpoint instead of starting fresh.
    pub resume: Option<PathBuf>,
    pub command_line: Vec<String>,
    /// Print a progress line to stderr every this many updates (0 = never).
    pub progress_every: usize,
    /// Stop after this many updates in total, even if the config asks for
    /// more. Used to interrupt runs in tests.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub updates: usize,
    pub checkpoints: Vec<PathBuf>,
    pub final_checkpoint: PathBuf,
    pub last_row: Option<MetricsRow>,
    pub rollout: PathBuf,
}

pub fn checkpoint_path(out_dir: &Path, update: usize) -> PathBuf {
    out_dir.join("checkpoints").join(format!("update-{update:07}.json"))
}

fn relative(out_dir: &Path, p: &Path) -> String {
    p.strip_prefix(out_dir).unwrap_or(p).display().to_string()
}

/// Runs the full staged schedule, writing `metrics.csv`, checkpoints, a
/// final rollout dump and `manifest.json` into `opts.out_dir`.
pub fn train(config: RunConfig, seed: u64, opts: &TrainOptions) -> Result<TrainSummary> {
    let out = &opts.out_dir;
    fs::create_dir_all(out.join("checkpoints")).map_err(|e| Error::io(out, e))?;

    let mut trainer = match &opts.resume {
        Some(path) => {
            let mut ck = Checkpoint::load(path)?;
            // the worker count does not affect results
            ck.config.training.workers = config.training.workers;
            if ck.config != config {
                return Err(Error::Checkpoint(format!(
                    "{} was written with a different configuration",
                    path.display()
                )));
            }
            if ck.seed != seed {
                return Err(Error::Checkpoint(format!(
                    "{} was written with seed {}, not {seed}",
                    path.display(),
                    ck.seed
                )));
            }
            Trainer::from_checkpoint(ck)?
        }
        None => Trainer::new(config.clone(), seed)?,
    };

    let mut manifest = RunManifest::new(config.clone(), seed, opts.command_line.clone());
    manifest.resumed_from = opts.resume.as_ref().map(|p| p.display().to_string());
    let manifest_path = out.join("manifest.json");
    manifest.save(&manifest_path)?;

    let metrics_path = out.join("metrics.csv");
    let mut metrics = match &opts.resume {
        Some(_) => MetricsWriter::resume(&metrics_path, trainer.update)?,
        None => MetricsWriter::create(&metrics_path)?,
    };

    let mut checkpoints = Vec::new();
    if trainer.update == 0 {
        let p = checkpoint_path(out, 0);
        trainer.checkpoint().save(&p)?;
        checkpoints.push(p);
    }

    let total = config.training.num_updates;
    let stop = opts.stop_after.unwrap_or(total).min(total);
    let every = config.training.checkpoint_every;
    let started = Instant::now();
    let mut last_row = None;
    while trainer.update < stop {
        let row = trainer.step()?;
        metrics.append(&row)?;
        let done = trainer.update;
        if (every > 0 && done % every == 0) || done == total {
            let p = checkpoint_path(out, done);
            trainer.checkpoint().save(&p)?;
            checkpoints.push(p);
        }
        if opts.progress_every > 0 && done % opts.progress_every == 0 {
            eprintln!(
                "update {done}/{total}  reward c {:.3} f {:.1} g {:.3}  price {:.0} wage {:.1}  {:.1}s",
                row.reward.consumer,
                row.reward.firm,
                row.reward.government,
                row.mean_price,
                row.mean_wage,
                started.elapsed().as_secs_f64()
            );
        }
        last_row = Some(row);
    }

    let final_checkpoint = checkpoint_path(out, trainer.update);
    if !final_checkpoint.exists() {
        trainer.checkpoint().save(&final_checkpoint)?;
        checkpoints.push(final_checkpoint.clone());
    }

    let schedule = trainer.curriculum.schedule(trainer.update);
    let record = trainer.record_episode(&schedule, GovernmentControl::Policy, trainer.update as u64)?;
    let rollout = out.join("rollout.json");
    record.save(&rollout)?;

    let mut files = vec!["manifest.json".to_string(), "metrics.csv".to_string(), "rollout.json".to_string()];
    let mut stored: Vec<String> = fs::read_dir(out.join("checkpoints"))
        .map_err(|e| Error::io(out, e))?
        .filter_map(|e| e.ok())
        .map(|e| relative(out, &e.path()))
        .collect();
    stored.sort();
    files.extend(stored);
    manifest.files = files;
    manifest.finished_unix = Some(crate::io::manifest::unix_now());
    manifest.save(&manifest_path)?;

    Ok(TrainSummary {
        updates: trainer.update,
        checkpoints,
        final_checkpoint,
        last_row,
        rollout,
    })
}
