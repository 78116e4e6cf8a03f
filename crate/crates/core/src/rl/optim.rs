use serde::{Deserialize, Serialize};

use crate::neural::{PolicyNet, Real};

/// Global l2 norm over all gradient tensors, accumulated in f64.
pub fn global_norm<F: Real>(grads: &PolicyNet<F>) -> f64 {
    grads
        .tensors()
        .iter()
        .flat_map(|t| t.iter())
        .map(|g| g.f64() * g.f64())
        .sum::<f64>()
        .sqrt()
}

/// Rescales `grads` so their global norm is at most `max_norm`, keeping the
/// direction. Returns the norm before clipping.
pub fn clip_gradients<F: Real>(grads: &mut PolicyNet<F>, max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        let scale = F::of(max_norm / norm);
        for t in grads.tensors_mut() {
            for g in t.iter_mut() {
                *g = *g * scale;
            }
        }
    }
    norm
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct Adam<F> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Vec<F>>,
    pub v: Vec<Vec<F>>,
}

impl<F: Real> Adam<F> {
    pub fn new(params: &PolicyNet<F>, lr: f64) -> Self {
        let shapes: Vec<Vec<F>> = params.tensors().iter().map(|t| vec![F::zero(); t.len()]).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: shapes.clone(),
            v: shapes,
        }
    }

    pub fn update(&mut self, params: &mut PolicyNet<F>, grads: &PolicyNet<F>) {
        self.step += 1;
        let b1 = F::of(self.beta1);
        let b2 = F::of(self.beta2);
        let one = F::one();
        let c1 = F::of(1.0 - self.beta1.powi(self.step as i32));
        let c2 = F::of(1.0 - self.beta2.powi(self.step as i32));
        let lr = F::of(self.lr);
        let eps = F::of(self.eps);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for k in 0..p.len() {
                let gk = g[k];
                m[k] = b1 * m[k] + (one - b1) * gk;
                v[k] = b2 * v[k] + (one - b2) * gk * gk;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] = p[k] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
