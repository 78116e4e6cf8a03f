use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dense, Real};
use crate::error::{Error, Result};

/// Number of hidden layers in the shared trunk.
pub const TRUNK_LAYERS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input_dim: usize,
    pub hidden: usize,
    /// Cardinality of each factorized action head.
    pub head_sizes: Vec<usize>,
}

impl NetSpec {
    pub fn total_logits(&self) -> usize {
        self.head_sizes.iter().sum()
    }
}

/// Shared tanh trunk feeding one linear head per action dimension and a
/// linear value head.
///
/// The same struct doubles as the gradient container for itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct PolicyNet<F> {
    pub spec: NetSpec,
    pub trunk: Vec<Dense<F>>,
    pub heads: Vec<Dense<F>>,
    pub value: Dense<F>,
}

/// Cached activations of a batched forward pass.
#[derive(Debug, Clone)]
pub struct BatchForward<F> {
    pub rows: usize,
    /// Post-tanh activations of each trunk layer, `rows x hidden` each. The
    /// last one is the shared feature.
    pub acts: Vec<Vec<F>>,
    /// Concatenated head logits, `rows x total_logits`.
    pub logits: Vec<F>,
    pub value: Vec<F>,
}

impl<F: Real> BatchForward<F> {
    pub fn logits_row(&self, row: usize, total: usize) -> &[F] {
        &self.logits[row * total..(row + 1) * total]
    }
}

impl<F: Real> PolicyNet<F> {
    pub fn new<R: Rng>(spec: NetSpec, rng: &mut R) -> Self {
        let h = spec.hidden;
        let mut trunk = Vec::with_capacity(TRUNK_LAYERS);
        let mut width = spec.input_dim;
        for _ in 0..TRUNK_LAYERS {
            trunk.push(Dense::init(width, h, rng));
            width = h;
        }
        let heads = spec.head_sizes.iter().map(|&n| Dense::init(h, n, rng)).collect();
        let value = Dense::init(h, 1, rng);
        Self {
            spec,
            trunk,
            heads,
            value,
        }
    }

    pub fn zeros(spec: NetSpec) -> Self {
        let h = spec.hidden;
        let mut trunk = Vec::with_capacity(TRUNK_LAYERS);
        let mut width = spec.input_dim;
        for _ in 0..TRUNK_LAYERS {
            trunk.push(Dense::zeros(width, h));
            width = h;
        }
        let heads = spec.head_sizes.iter().map(|&n| Dense::zeros(h, n)).collect();
        Self {
            value: Dense::zeros(h, 1),
            spec,
            trunk,
            heads,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.spec.clone())
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Every parameter tensor in a fixed order.
    pub fn tensors(&self) -> Vec<&[F]> {
        let mut out = Vec::new();
        for d in self.trunk.iter().chain(&self.heads).chain(std::iter::once(&self.value)) {
            out.push(d.weight.as_slice());
            out.push(d.bias.as_slice());
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        let mut out = Vec::new();
        for d in self
            .trunk
            .iter_mut()
            .chain(self.heads.iter_mut())
            .chain(std::iter::once(&mut self.value))
        {
            out.push(d.weight.as_mut_slice());
            out.push(d.bias.as_mut_slice());
        }
        out
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(F::zero());
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x = *x + *y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Single-row forward pass: shared feature, head logits, value.
    pub fn forward(&self, obs: &[F]) -> Result<(Vec<F>, Vec<F>, F)> {
        let fwd = self.forward_batch(obs, 1)?;
        let phi = fwd.acts[TRUNK_LAYERS - 1].clone();
        Ok((phi, fwd.logits, fwd.value[0]))
    }

    pub fn forward_batch(&self, obs: &[F], rows: usize) -> Result<BatchForward<F>> {
        let d = self.spec.input_dim;
        if obs.len() != rows * d {
            return Err(Error::Shape(format!(
                "expected {rows} rows of width {d}, got {} values",
                obs.len()
            )));
        }
        let h = self.spec.hidden;
        let total = self.spec.total_logits();
        let mut acts: Vec<Vec<F>> = (0..TRUNK_LAYERS).map(|_| vec![F::zero(); rows * h]).collect();
        let mut logits = vec![F::zero(); rows * total];
        let mut value = vec![F::zero(); rows];
        for r in 0..rows {
            for l in 0..TRUNK_LAYERS {
                let (before, after) = acts.split_at_mut(l);
                let input: &[F] = if l == 0 {
                    &obs[r * d..(r + 1) * d]
                } else {
                    &before[l - 1][r * h..(r + 1) * h]
                };
                let out = &mut after[0][r * h..(r + 1) * h];
                self.trunk[l].forward(input, out);
                for v in out.iter_mut() {
                    *v = v.tanh();
                }
            }
            let phi = &acts[TRUNK_LAYERS - 1][r * h..(r + 1) * h];
            let mut off = r * total;
            for head in &self.heads {
                head.forward(phi, &mut logits[off..off + head.out_dim]);
                off += head.out_dim;
            }
            self.value.forward(phi, std::slice::from_mut(&mut value[r]));
        }
        Ok(BatchForward {
            rows,
            acts,
            logits,
            value,
        })
    }

    /// Backpropagates loss seeds (gradients with respect to the logits and
    /// the value output) and accumulates parameter gradients into `grads`.
    pub fn backward(
        &self,
        obs: &[F],
        cache: &BatchForward<F>,
        d_logits: &[F],
        d_value: &[F],
        grads: &mut PolicyNet<F>,
    ) {
        let d = self.spec.input_dim;
        let h = self.spec.hidden;
        let total = self.spec.total_logits();
        let mut d_act = vec![F::zero(); h];
        let mut tmp = vec![F::zero(); h];
        let mut d_below = vec![F::zero(); h];
        for r in 0..cache.rows {
            let phi = &cache.acts[TRUNK_LAYERS - 1][r * h..(r + 1) * h];
            d_act.fill(F::zero());
            let mut off = r * total;
            for (head, g) in self.heads.iter().zip(grads.heads.iter_mut()) {
                let seed = &d_logits[off..off + head.out_dim];
                head.backward(phi, seed, g, Some(&mut tmp));
                for (a, t) in d_act.iter_mut().zip(&tmp) {
                    *a = *a + *t;
                }
                off += head.out_dim;
            }
            self.value
                .backward(phi, &d_value[r..r + 1], &mut grads.value, Some(&mut tmp));
            for (a, t) in d_act.iter_mut().zip(&tmp) {
                *a = *a + *t;
            }
            for l in (0..TRUNK_LAYERS).rev() {
                let act = &cache.acts[l][r * h..(r + 1) * h];
                for (g, a) in d_act.iter_mut().zip(act) {
                    *g = *g * (F::one() - *a * *a);
                }
                if l == 0 {
                    let input = &obs[r * d..(r + 1) * d];
                    self.trunk[0].backward(input, &d_act, &mut grads.trunk[0], None);
                } else {
                    let input = &cache.acts[l - 1][r * h..(r + 1) * h];
                    self.trunk[l].backward(input, &d_act, &mut grads.trunk[l], Some(&mut d_below));
                    std::mem::swap(&mut d_act, &mut d_below);
                }
            }
        }
    }

    pub fn cast<G: Real>(&self) -> PolicyNet<G> {
        let conv = |d: &Dense<F>| Dense {
            in_dim: d.in_dim,
            out_dim: d.out_dim,
            weight: d.weight.iter().map(|v| G::of(v.f64())).collect(),
            bias: d.bias.iter().map(|v| G::of(v.f64())).collect(),
        };
        PolicyNet {
            spec: self.spec.clone(),
            trunk: self.trunk.iter().map(conv).collect(),
            heads: self.heads.iter().map(conv).collect(),
            value: conv(&self.value),
        }
    }
}
