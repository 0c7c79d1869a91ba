//! Policy/value network, advantage estimation, clipped-surrogate updates and
//! the training loop.

mod gae;
mod network;
mod ppo;
mod train;

pub use gae::{compute_gae, normalize_advantages};
pub use network::{gaussian_log_prob, NetShape, PolicyOutput, PolicyParameters, OBS_DIM};
pub use ppo::{ppo_loss, ppo_loss_and_grad, ppo_update, Adam, EpochStats, LossParts, Sample, Transition};
pub use train::{
    collect_episode, evaluate_policy, train, train_from, Checkpoint, CurvePoint, TrainConfig, TrainOutcome,
};
