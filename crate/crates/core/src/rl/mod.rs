//! Returns, advantages, policy-gradient and PPO objectives, the Huber value
//! loss, gradient clipping and Adam.

mod loss;
mod optim;
mod returns;

pub use loss::{
    huber, huber_grad, huber_value_loss, ppo_surrogate, reinforce_loss, row_loss, LossSettings,
    RowLoss,
};
pub use optim::{clip_gradients, global_norm, Adam};
pub use returns::{discounted_returns, standardize, standardized_advantages};
