use rayon::prelude::*;

use super::rollout::TypeBatch;
use crate::agent::AgentType;
use crate::error::{Error, Result};
use crate::neural::{HeadMask, PolicyNet};
use crate::rl::{clip_gradients, discounted_returns, row_loss, standardize, Adam, LossSettings};

/// Number of contiguous row ranges whose gradients are computed
/// independently and then summed in order. Fixed so the result does not
/// depend on the thread count.
pub const GRADIENT_SHARDS: usize = 16;
const FORWARD_ROWS: usize = 64;

/// Per-update diagnostics for one agent type.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Global gradient norm before clipping, last epoch.
    pub grad_norm: f64,
    /// Mean of `logp_old - logp_new` over the last epoch.
    pub approx_kl: f64,
}

/// Reward-to-go per agent trajectory (discounted, no bootstrap).
pub fn batch_returns(batch: &TypeBatch, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; batch.rows()];
    let mut rewards = vec![0.0; batch.steps];
    for r in 0..batch.replicas {
        for a in 0..batch.agents {
            for (t, v) in rewards.iter_mut().enumerate() {
                *v = f64::from(batch.reward[batch.row(r, t, a)]);
            }
            for (t, g) in discounted_returns(&rewards, gamma).into_iter().enumerate() {
                out[batch.row(r, t, a)] = g;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    policy: f64,
    value: f64,
    entropy: f64,
    kl: f64,
}

fn shard_gradient(
    net: &PolicyNet<f32>,
    batch: &TypeBatch,
    masks: &[HeadMask],
    settings: &LossSettings,
    advantages: &[f32],
    returns: &[f32],
    range: std::ops::Range<usize>,
) -> Result<(PolicyNet<f32>, Sums)> {
    let mut grads = net.zeros_like();
    let mut sums = Sums::default();
    let total = net.spec.total_logits();
    let w = batch.width;
    let heads = batch.heads;
    let weight = 1.0 / batch.rows() as f32;
    let mut scratch = Vec::new();
    let mut d_logits = Vec::new();
    let mut d_value = Vec::new();
    let mut start = range.start;
    while start < range.end {
        let end = (start + FORWARD_ROWS).min(range.end);
        let rows = end - start;
        let obs = &batch.obs[start * w..end * w];
        let fwd = net.forward_batch(obs, rows)?;
        d_logits.clear();
        d_logits.resize(rows * total, 0.0f32);
        d_value.clear();
        d_value.resize(rows, 0.0f32);
        for k in 0..rows {
            let row = start + k;
            let r = row_loss(
                settings,
                &net.spec.head_sizes,
                masks,
                fwd.logits_row(k, total),
                fwd.value[k],
                &batch.actions[row * heads..(row + 1) * heads],
                batch.log_prob[row],
                advantages[row],
                returns[row],
                weight,
                &mut scratch,
                &mut d_logits[k * total..(k + 1) * total],
            );
            d_value[k] = r.d_value;
            sums.policy += f64::from(r.policy);
            sums.value += f64::from(r.value);
            sums.entropy += f64::from(r.entropy);
            sums.kl += f64::from(batch.log_prob[row] - r.log_prob);
        }
        net.backward(obs, &fwd, &d_logits, &d_value, &mut grads);
        start = end;
    }
    Ok((grads, sums))
}

/// Gradient of the mean composed loss over the whole batch.
///
/// Rows are split into [`GRADIENT_SHARDS`] fixed ranges processed on the
/// current rayon pool and summed in range order.
pub fn batch_gradient(
    net: &PolicyNet<f32>,
    batch: &TypeBatch,
    masks: &[HeadMask],
    settings: &LossSettings,
    advantages: &[f32],
    returns: &[f32],
) -> Result<(PolicyNet<f32>, UpdateStats)> {
    let n = batch.rows();
    let shards = GRADIENT_SHARDS.min(n.max(1));
    let ranges: Vec<_> = (0..shards).map(|s| (s * n / shards)..((s + 1) * n / shards)).collect();
    let parts: Vec<Result<(PolicyNet<f32>, Sums)>> = ranges
        .into_par_iter()
        .map(|range| shard_gradient(net, batch, masks, settings, advantages, returns, range))
        .collect();
    let mut grads = net.zeros_like();
    let mut sums = Sums::default();
    for part in parts {
        let (g, s) = part?;
        grads.add_assign(&g);
        sums.policy += s.policy;
        sums.value += s.value;
        sums.entropy += s.entropy;
        sums.kl += s.kl;
    }
    let stats = UpdateStats {
        policy_loss: sums.policy,
        value_loss: sums.value,
        entropy: sums.entropy,
        grad_norm: 0.0,
        approx_kl: sums.kl / n.max(1) as f64,
    };
    Ok((grads, stats))
}

/// Hyperparameters of one type's update.
#[derive(Debug, Clone, Copy)]
pub struct UpdateSettings {
    pub loss: LossSettings,
    pub gamma: f64,
    pub epochs: usize,
    pub max_grad_norm: f64,
}

/// Policy update for one agent type: returns and standardized advantages,
/// then `epochs` full-batch gradient steps with clipping and Adam.
///
/// All agents of the type contribute to the single shared network.
pub fn update_type(
    agent: AgentType,
    update: usize,
    net: &mut PolicyNet<f32>,
    adam: &mut Adam<f32>,
    batch: &TypeBatch,
    masks: &[HeadMask],
    settings: &UpdateSettings,
) -> Result<UpdateStats> {
    if batch.rows() == 0 {
        return Ok(UpdateStats::default());
    }
    let returns = batch_returns(batch, settings.gamma);
    let mut adv: Vec<f64> = returns
        .iter()
        .zip(&batch.value)
        .map(|(g, v)| g - f64::from(*v))
        .collect();
    standardize(&mut adv);
    let adv: Vec<f32> = adv.into_iter().map(|a| a as f32).collect();
    let returns: Vec<f32> = returns.into_iter().map(|g| g as f32).collect();

    let mut stats = UpdateStats::default();
    for _ in 0..settings.epochs {
        let (mut grads, s) = batch_gradient(net, batch, masks, &settings.loss, &adv, &returns)?;
        let loss = s.policy_loss + s.value_loss - settings.loss.entropy_coeff * s.entropy;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::NonFinite {
                agent: agent.name(),
                update,
                detail: format!(
                    "policy loss {}, value loss {}, entropy {}",
                    s.policy_loss, s.value_loss, s.entropy
                ),
            });
        }
        let norm = clip_gradients(&mut grads, settings.max_grad_norm);
        adam.update(net, &grads);
        stats = UpdateStats { grad_norm: norm, ..s };
    }
    if !net.is_finite() {
        return Err(Error::NonFinite {
            agent: agent.name(),
            update,
            detail: "parameters became non-finite".into(),
        });
    }
    Ok(stats)
}
