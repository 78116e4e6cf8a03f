//! Two-armed bandit driven through the same update path as the economy
//! trainer. Arm 0 pays 1, arm 1 pays 0.

use crate::agent::AgentType;
use crate::config::Algorithm;
use crate::error::Result;
use crate::neural::{sample, ActionDistribution, NetSpec, PolicyNet};
use crate::rl::{Adam, LossSettings};

use super::rollout::TypeBatch;
use super::update::{update_type, UpdateSettings};
use super::{stream_rng, Stream};

#[derive(Debug, Clone, Copy)]
pub struct BanditSettings {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub max_updates: usize,
    pub pulls_per_update: usize,
    pub learning_rate: f64,
    pub entropy_coeff: f64,
    pub threshold: f64,
}

impl BanditSettings {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        Self {
            algorithm,
            seed,
            max_updates: 2000,
            pulls_per_update: 32,
            learning_rate: 0.01,
            entropy_coeff: 0.0,
            threshold: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BanditOutcome {
    /// Probability of the paying arm when training stopped.
    pub p_best: f64,
    /// Updates run before the probability passed the threshold, if it did.
    pub updates_to_threshold: Option<usize>,
}

fn p_best(net: &PolicyNet<f32>) -> Result<(f64, ActionDistribution<f32>)> {
    let (_, logits, _) = net.forward(&[1.0])?;
    let dist = ActionDistribution::from_logits(&logits, &[2], &[None])?;
    Ok((dist.probs(0)[0], dist))
}

pub fn run_bandit(s: &BanditSettings) -> Result<BanditOutcome> {
    let mut init = stream_rng(s.seed, Stream::Init, 0, 0);
    let mut net = PolicyNet::<f32>::new(
        NetSpec {
            input_dim: 1,
            hidden: 8,
            head_sizes: vec![2],
        },
        &mut init,
    );
    let mut adam = Adam::new(&net, s.learning_rate);
    let settings = UpdateSettings {
        loss: LossSettings {
            algorithm: s.algorithm,
            clip: 0.2,
            entropy_coeff: s.entropy_coeff,
            value_coeff: 0.5,
        },
        gamma: 1.0,
        epochs: match s.algorithm {
            Algorithm::Ppo => 2,
            Algorithm::Reinforce => 1,
        },
        max_grad_norm: 2.0,
    };
    let n = s.pulls_per_update;
    for u in 0..s.max_updates {
        let (p, dist) = p_best(&net)?;
        if p > s.threshold {
            return Ok(BanditOutcome {
                p_best: p,
                updates_to_threshold: Some(u),
            });
        }
        let (_, _, value) = net.forward(&[1.0])?;
        let mut rng = stream_rng(s.seed, Stream::Train, u as u64, 0);
        let mut batch = TypeBatch {
            width: 1,
            heads: 1,
            agents: 1,
            steps: 1,
            replicas: n,
            obs: vec![1.0; n],
            ..TypeBatch::default()
        };
        for _ in 0..n {
            let pick = sample(&dist, &mut rng);
            batch.actions.push(pick.actions[0] as u16);
            batch.log_prob.push(pick.log_prob);
            batch.value.push(value);
            batch.reward.push(if pick.actions[0] == 0 { 1.0 } else { 0.0 });
            batch.entropy.push(0.0);
        }
        update_type(AgentType::Consumer, u, &mut net, &mut adam, &batch, &[None], &settings)?;
    }
    let (p, _) = p_best(&net)?;
    Ok(BanditOutcome {
        p_best: p,
        updates_to_threshold: (p > s.threshold).then_some(s.max_updates),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_algorithms_find_the_paying_arm() {
        for alg in [Algorithm::Reinforce, Algorithm::Ppo] {
            let out = run_bandit(&BanditSettings::new(alg, 1)).unwrap();
            assert!(out.p_best > 0.99, "{alg:?}: {out:?}");
        }
    }
}
