use crate::config::Algorithm;
use crate::neural::{log_softmax_masked, HeadMask, Real};

/// Huber loss with threshold 1.
pub fn huber<F: Real>(x: F) -> F {
    let a = x.abs();
    if a <= F::one() {
        F::of(0.5) * x * x
    } else {
        a - F::of(0.5)
    }
}

pub fn huber_grad<F: Real>(x: F) -> F {
    x.max(-F::one()).min(F::one())
}

/// Mean Huber loss of `values - returns` and its gradient with respect to
/// each value prediction.
pub fn huber_value_loss<F: Real>(values: &[F], returns: &[F]) -> (F, Vec<F>) {
    let n = F::of(values.len() as f64);
    let loss = values.iter().zip(returns).map(|(v, g)| huber(*v - *g)).sum::<F>() / n;
    let grad = values.iter().zip(returns).map(|(v, g)| huber_grad(*v - *g) / n).collect();
    (loss, grad)
}

/// Clipped surrogate for one sample and its derivative with respect to the
/// new log-probability.
fn ppo_term<F: Real>(logp_new: F, logp_old: F, adv: F, clip: F) -> (F, F) {
    let ratio = (logp_new - logp_old).exp();
    let lo = F::one() - clip;
    let hi = F::one() + clip;
    let clipped = ratio.max(lo).min(hi);
    let unclipped_obj = ratio * adv;
    let clipped_obj = clipped * adv;
    if unclipped_obj <= clipped_obj || (ratio >= lo && ratio <= hi) {
        (unclipped_obj, ratio * adv)
    } else {
        (clipped_obj, F::zero())
    }
}

/// `-mean(min(r * A, clip(r) * A))` with `r = exp(logp_new - logp_old)`, and
/// its gradient with respect to each `logp_new`.
pub fn ppo_surrogate<F: Real>(logp_new: &[F], logp_old: &[F], adv: &[F], clip: F) -> (F, Vec<F>) {
    let n = F::of(logp_new.len() as f64);
    let mut loss = F::zero();
    let mut grad = Vec::with_capacity(logp_new.len());
    for ((ln, lo), a) in logp_new.iter().zip(logp_old).zip(adv) {
        let (obj, d) = ppo_term(*ln, *lo, *a, clip);
        loss = loss - obj / n;
        grad.push(-d / n);
    }
    (loss, grad)
}

/// `-mean(A * logp) - alpha * mean(H)` and its gradient with respect to each
/// log-probability.
pub fn reinforce_loss<F: Real>(logp: &[F], adv: &[F], entropy: &[F], alpha: F) -> (F, Vec<F>) {
    let n = F::of(logp.len() as f64);
    let pg = logp.iter().zip(adv).map(|(l, a)| *l * *a).sum::<F>() / n;
    let h = entropy.iter().copied().sum::<F>() / n;
    let grad = adv.iter().map(|a| -*a / n).collect();
    (-pg - alpha * h, grad)
}

#[derive(Debug, Clone, Copy)]
pub struct LossSettings {
    pub algorithm: Algorithm,
    pub clip: f64,
    pub entropy_coeff: f64,
    pub value_coeff: f64,
}

/// Per-sample contributions to the composed loss.
#[derive(Debug, Clone, Copy, Default)]
pub struct RowLoss<F> {
    pub policy: F,
    pub value: F,
    pub entropy: F,
    pub d_value: F,
    pub log_prob: F,
}

/// Loss of one sample, weighted by `weight` (normally `1 / batch_size`),
/// writing d(loss)/d(logits) into `d_logits`.
///
/// The composed loss is `policy - entropy_coeff * H + value_coeff *
/// huber(V - G)` where the policy term is the negated PPO surrogate or the
/// negated REINFORCE objective.
#[allow(clippy::too_many_arguments)]
pub fn row_loss<F: Real>(
    settings: &LossSettings,
    head_sizes: &[usize],
    masks: &[HeadMask],
    logits: &[F],
    value: F,
    actions: &[u16],
    old_log_prob: F,
    advantage: F,
    ret: F,
    weight: F,
    scratch: &mut Vec<F>,
    d_logits: &mut [F],
) -> RowLoss<F> {
    scratch.resize(logits.len(), F::zero());
    let mut off = 0;
    let mut logp = F::zero();
    for (h, &n) in head_sizes.iter().enumerate() {
        let mask = masks.get(h).and_then(|m| m.as_deref());
        log_softmax_masked(&logits[off..off + n], mask, &mut scratch[off..off + n]);
        logp = logp + scratch[off + actions[h] as usize];
        off += n;
    }
    let (objective, d_obj) = match settings.algorithm {
        Algorithm::Ppo => ppo_term(logp, old_log_prob, advantage, F::of(settings.clip)),
        Algorithm::Reinforce => (advantage * logp, advantage),
    };
    let alpha = F::of(settings.entropy_coeff);
    let d_logp = -d_obj * weight;
    let mut entropy = F::zero();
    let mut off = 0;
    for (h, &n) in head_sizes.iter().enumerate() {
        let h_ent: F = scratch[off..off + n]
            .iter()
            .filter(|l| l.is_finite())
            .map(|&l| -(l.exp() * l))
            .sum();
        entropy = entropy + h_ent;
        for k in 0..n {
            let lp = scratch[off + k];
            d_logits[off + k] = if lp.is_finite() {
                let p = lp.exp();
                let chosen = if k == actions[h] as usize { F::one() } else { F::zero() };
                d_logp * (chosen - p) + alpha * weight * p * (lp + h_ent)
            } else {
                F::zero()
            };
        }
        off += n;
    }
    let vc = F::of(settings.value_coeff);
    let err = value - ret;
    RowLoss {
        policy: -objective * weight,
        value: vc * huber(err) * weight,
        entropy: entropy * weight,
        d_value: vc * huber_grad(err) * weight,
        log_prob: logp,
    }
}
