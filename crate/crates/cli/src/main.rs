use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use rbc_core::curriculum::Curriculum;
use rbc_core::equilibrium::{best_response, fixed_tax_sweep, parse_rates, BestResponseOptions, SweepOptions};
use rbc_core::io::write_json;
use rbc_core::obs::ObsLayout;
use rbc_core::{AgentType, Checkpoint, GovernmentControl, RunConfig, TrainOptions, Trainer};

/// Multi-agent real-business-cycle simulator and trainer.
#[derive(Parser, Debug)]
#[command(name = "rbcsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train consumer, firm and government policies.
    Train {
        /// TOML config; missing keys take their defaults.
        #[arg(long)]
        config: PathBuf,
        /// Master seed for initialization and every rollout.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for metrics, checkpoints, rollout and manifest.
        #[arg(long)]
        out: PathBuf,
        /// Disable the curriculum: full action ranges, final disutility and
        /// every type training from the first update.
        #[arg(long)]
        no_curriculum: bool,
        /// Continue from a checkpoint written by an earlier run with the same
        /// config and seed.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Rollout worker threads (0 = all cores). Does not change results.
        #[arg(long)]
        workers: Option<usize>,
        /// Print a progress line every N updates.
        #[arg(long, default_value_t = 0)]
        progress: usize,
    },
    /// Export one episode played by a checkpoint's policies as JSON.
    Rollout {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use the curriculum schedule at the checkpoint's update instead of
        /// the fully annealed one.
        #[arg(long)]
        at_checkpoint: bool,
    },
    /// Retrain one agent type against frozen opponents and report the gain.
    BestResponse {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Agent type: c, f or g.
        #[arg(long = "type")]
        agent: AgentType,
        /// Best-response training updates.
        #[arg(long)]
        updates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Evaluation episodes (default: training.eval_episodes).
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate welfare under fixed tax rates next to the RL government.
    BaselineSweep {
        #[arg(long)]
        checkpoint: PathBuf,
        /// `income:corporate` pairs separated by commas, or `default` for
        /// {0.2, 0.4, 0.6, 0.8} squared.
        #[arg(long, default_value = "default")]
        rates: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        episodes: Option<usize>,
        /// Retrain consumers and firms against each rate first.
        #[arg(long, default_value_t = 0)]
        retrain_updates: usize,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Write `<out>.json` and `<out>.csv`; prints JSON to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the observation layout as JSON.
    Layout {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the curriculum schedule as CSV.
    ScheduleDump {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Last update to include (default: training.num_updates).
        #[arg(long)]
        until: Option<usize>,
        #[arg(long, default_value_t = 100)]
        stride: usize,
        #[arg(long)]
        no_curriculum: bool,
    },
}

fn load_config(path: Option<&Path>) -> anyhow::Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => write_json(p, value)?,
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            no_curriculum,
            resume,
            workers,
            progress,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if no_curriculum {
                cfg.curriculum.enabled = false;
            }
            if let Some(w) = workers {
                cfg.training.workers = w;
            }
            let opts = TrainOptions {
                out_dir: out,
                resume,
                command_line: std::env::args().collect(),
                progress_every: progress,
                stop_after: None,
            };
            let summary = rbc_core::train(cfg, seed, &opts)?;
            eprintln!(
                "trained {} updates; final checkpoint {}",
                summary.updates,
                summary.final_checkpoint.display()
            );
        }
        Command::Rollout {
            checkpoint,
            out,
            seed,
            at_checkpoint,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let update = ck.update;
            let trainer = Trainer::from_checkpoint(ck)?;
            let schedule = if at_checkpoint {
                trainer.curriculum().schedule(update)
            } else {
                trainer.curriculum().terminal()
            };
            let record = trainer.record_episode(&schedule, GovernmentControl::Policy, seed)?;
            record.save(&out)?;
        }
        Command::BestResponse {
            checkpoint,
            agent,
            updates,
            seed,
            episodes,
            workers,
            out,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let opts = BestResponseOptions {
                agent,
                updates,
                seed,
                eval_episodes: episodes,
                workers,
            };
            let report = best_response(&ck, &opts)?;
            emit_json(&report, out.as_deref())?;
        }
        Command::BaselineSweep {
            checkpoint,
            rates,
            seed,
            episodes,
            retrain_updates,
            workers,
            out,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let opts = SweepOptions {
                rates: parse_rates(&rates)?,
                seed,
                episodes,
                retrain_updates,
                workers,
            };
            let report = fixed_tax_sweep(&ck, &opts)?;
            match out {
                Some(prefix) => {
                    write_json(&prefix.with_extension("json"), &report)?;
                    let csv = prefix.with_extension("csv");
                    std::fs::write(&csv, report.to_csv()).with_context(|| format!("writing {}", csv.display()))?;
                }
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
            let best = &report.rows[report.best];
            eprintln!(
                "best fixed rates ({}, {}) welfare {:.4}; RL government {:.4} ({:+.1}%)",
                best.tax_income,
                best.tax_corporate,
                best.welfare,
                report.rl_government.welfare,
                100.0 * report.rl_relative_to_best
            );
        }
        Command::Layout { config } => {
            let cfg = load_config(config.as_deref())?;
            emit_json(&ObsLayout::new(&cfg.economy), None)?;
        }
        Command::ScheduleDump {
            config,
            until,
            stride,
            no_curriculum,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if no_curriculum {
                cfg.curriculum.enabled = false;
            }
            let c = Curriculum::new(&cfg.curriculum, &cfg.economy)?;
            print!("{}", c.dump_csv(until.unwrap_or(cfg.training.num_updates), stride));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e
                .downcast_ref::<rbc_core::Error>()
                .is_some_and(rbc_core::Error::is_config)
                || e.downcast_ref::<rbc_core::ConfigError>().is_some();
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}
