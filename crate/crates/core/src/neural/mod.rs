//! Multi-layer perceptron policies with factorized categorical heads and a
//! scalar value head, all reading one shared trunk feature.
//!
//! Forward and backward passes are hand-written. Each row of a batch is
//! processed independently, so batched results are bit-identical to
//! row-by-row results.

mod dense;
mod dist;
mod net;

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub use dense::Dense;
pub use dist::{entropy, log_softmax_masked, sample, ActionDistribution, HeadMask, Sampled};
pub use net::{BatchForward, NetSpec, PolicyNet};

/// Floating point type the networks are generic over (`f32` for training,
/// `f64` for gradient checks).
pub trait Real:
    Float + Default + Debug + Send + Sync + Sum + Serialize + DeserializeOwned + 'static
{
    fn of(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("finite conversion")
    }

    fn f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}
