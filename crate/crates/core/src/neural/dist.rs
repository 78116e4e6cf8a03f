use rand::Rng;

use super::Real;
use crate::error::{Error, Result};

/// Admissible actions of one head; `None` admits every action.
pub type HeadMask = Option<Vec<bool>>;

/// Log-softmax over the unmasked entries; masked entries get `-inf`.
pub fn log_softmax_masked<F: Real>(logits: &[F], mask: Option<&[bool]>, out: &mut [F]) {
    let allowed = |k: usize| mask.map_or(true, |m| m[k]);
    let mut max = F::neg_infinity();
    for (k, &z) in logits.iter().enumerate() {
        if allowed(k) && z > max {
            max = z;
        }
    }
    let mut total = F::zero();
    for (k, &z) in logits.iter().enumerate() {
        if allowed(k) {
            total = total + (z - max).exp();
        }
    }
    let log_total = total.ln() + max;
    for (k, (o, &z)) in out.iter_mut().zip(logits).enumerate() {
        *o = if allowed(k) { z - log_total } else { F::neg_infinity() };
    }
}

/// Factorized categorical distribution: one independent categorical per
/// action head, stored as log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution<F> {
    pub log_probs: Vec<Vec<F>>,
}

impl<F: Real> ActionDistribution<F> {
    /// Builds the distribution from concatenated head logits.
    pub fn from_logits(logits: &[F], head_sizes: &[usize], masks: &[HeadMask]) -> Result<Self> {
        let mut log_probs = Vec::with_capacity(head_sizes.len());
        let mut off = 0;
        for (h, &n) in head_sizes.iter().enumerate() {
            let mask = masks.get(h).and_then(|m| m.as_deref());
            if let Some(m) = mask {
                if m.len() != n {
                    return Err(Error::Shape(format!(
                        "mask for head {h} has {} entries, head has {n}",
                        m.len()
                    )));
                }
                if !m.iter().any(|a| *a) {
                    return Err(Error::FullyMasked(h));
                }
            }
            let mut lp = vec![F::zero(); n];
            log_softmax_masked(&logits[off..off + n], mask, &mut lp);
            log_probs.push(lp);
            off += n;
        }
        Ok(Self { log_probs })
    }

    pub fn probs(&self, head: usize) -> Vec<f64> {
        self.log_probs[head].iter().map(|lp| lp.f64().exp()).collect()
    }

    /// Joint log-probability of one action per head.
    pub fn log_prob(&self, actions: &[usize]) -> F {
        self.log_probs
            .iter()
            .zip(actions)
            .map(|(lp, &a)| lp[a])
            .sum()
    }
}

/// Categorical entropy of one head over its unmasked support.
pub fn head_entropy<F: Real>(log_probs: &[F]) -> F {
    log_probs
        .iter()
        .filter(|lp| lp.is_finite())
        .map(|&lp| -(lp.exp() * lp))
        .sum()
}

/// Entropy of the factorized distribution (sum over heads).
pub fn entropy<F: Real>(dist: &ActionDistribution<F>) -> F {
    dist.log_probs.iter().map(|lp| head_entropy(lp)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sampled<F> {
    pub actions: Vec<usize>,
    pub log_prob: F,
}

/// Draws one action per head by inverse-CDF sampling.
pub fn sample<F: Real, R: Rng>(dist: &ActionDistribution<F>, rng: &mut R) -> Sampled<F> {
    let mut actions = Vec::with_capacity(dist.log_probs.len());
    for lp in &dist.log_probs {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last_allowed = 0;
        let mut choice = None;
        for (k, l) in lp.iter().enumerate() {
            if !l.is_finite() {
                continue;
            }
            last_allowed = k;
            acc += l.f64().exp();
            if u < acc {
                choice = Some(k);
                break;
            }
        }
        // round-off can leave the cumulative sum just below u
        actions.push(choice.unwrap_or(last_allowed));
    }
    let log_prob = dist.log_prob(&actions);
    Sampled { actions, log_prob }
}
