use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Real;

/// Fully connected layer, `y = x W + b` with `W` stored row-major as
/// `in_dim x out_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct Dense<F> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<F>,
    pub bias: Vec<F>,
}

impl<F: Real> Dense<F> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![F::zero(); in_dim * out_dim],
            bias: vec![F::zero(); out_dim],
        }
    }

    /// Uniform init in `±1/sqrt(in_dim)` for weights and biases.
    pub fn init<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        let mut draw = || F::of(rng.gen_range(-bound..bound));
        Self {
            in_dim,
            out_dim,
            weight: (0..in_dim * out_dim).map(|_| draw()).collect(),
            bias: (0..out_dim).map(|_| draw()).collect(),
        }
    }

    pub fn forward(&self, x: &[F], out: &mut [F]) {
        debug_assert_eq!(x.len(), self.in_dim);
        out.copy_from_slice(&self.bias);
        for (k, &xk) in x.iter().enumerate() {
            if xk == F::zero() {
                continue;
            }
            let row = &self.weight[k * self.out_dim..(k + 1) * self.out_dim];
            for (o, w) in out.iter_mut().zip(row) {
                *o = *o + xk * *w;
            }
        }
    }

    /// Accumulates parameter gradients into `grad` and, when requested,
    /// writes the gradient with respect to the input into `dx`.
    pub fn backward(&self, x: &[F], dout: &[F], grad: &mut Dense<F>, dx: Option<&mut [F]>) {
        for (g, d) in grad.bias.iter_mut().zip(dout) {
            *g = *g + *d;
        }
        for (k, &xk) in x.iter().enumerate() {
            if xk == F::zero() {
                continue;
            }
            let row = &mut grad.weight[k * self.out_dim..(k + 1) * self.out_dim];
            for (g, d) in row.iter_mut().zip(dout) {
                *g = *g + xk * *d;
            }
        }
        if let Some(dx) = dx {
            for (k, slot) in dx.iter_mut().enumerate() {
                let row = &self.weight[k * self.out_dim..(k + 1) * self.out_dim];
                *slot = row.iter().zip(dout).map(|(w, d)| *w * *d).sum();
            }
        }
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}
