//! Multi-agent real-business-cycle economy with a batched PPO training stack.
//!
//! The crate holds the simulator ([`economy`]), observation encoding
//! ([`obs`]), policy networks ([`neural`]), losses and optimizers ([`rl`]),
//! the training [`curriculum`], the replica [`trainer`], equilibrium
//! diagnostics ([`equilibrium`]) and run persistence ([`io`]).

pub mod agent;
pub mod config;
pub mod curriculum;
pub mod economy;
pub mod equilibrium;
pub mod error;
pub mod io;
pub mod neural;
pub mod obs;
pub mod rl;
pub mod trainer;

pub use agent::{AgentType, PerType};
pub use config::{
    Algorithm, ConsumerConfig, CurriculumConfig, EconomyConfig, ExportConfig, FirmConfig,
    GovernmentConfig, RunConfig, TrainingConfig, WelfareMode,
};
pub use curriculum::{Curriculum, Gates, Schedule};
pub use economy::{ConsumerAction, Economy, FirmAction, GovernmentAction, StepOutcome, WorldState};
pub use error::{ConfigError, Error, Result};
pub use neural::{NetSpec, PolicyNet};
pub use obs::{ObsEncoder, ObsLayout};
pub use trainer::{train, GovernmentControl, TrainOptions, TrainSummary, Trainer};
pub use io::{Checkpoint, EpisodeRecord, RunManifest};
