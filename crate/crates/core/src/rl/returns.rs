use crate::neural::Real;

/// Reward-to-go `G_t = r_t + gamma * G_{t+1}` with `G_T = 0`; episodes end
/// without bootstrapping.
pub fn discounted_returns<F: Real>(rewards: &[F], gamma: F) -> Vec<F> {
    let mut out = vec![F::zero(); rewards.len()];
    let mut acc = F::zero();
    for (g, r) in out.iter_mut().zip(rewards).rev() {
        acc = *r + gamma * acc;
        *g = acc;
    }
    out
}

/// `(x - mean) / (std + 1e-8)` with the population standard deviation.
pub fn standardize<F: Real>(values: &mut [F]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().map(|v| v.f64()).sum::<f64>() / n;
    let var = values.iter().map(|v| (v.f64() - mean).powi(2)).sum::<f64>() / n;
    let denom = var.sqrt() + 1e-8;
    for v in values.iter_mut() {
        *v = F::of((v.f64() - mean) / denom);
    }
}

/// Centered and standardized `G - V`.
pub fn standardized_advantages<F: Real>(returns: &[F], values: &[F]) -> Vec<F> {
    let mut a: Vec<F> = returns.iter().zip(values).map(|(g, v)| *g - *v).collect();
    standardize(&mut a);
    a
}
