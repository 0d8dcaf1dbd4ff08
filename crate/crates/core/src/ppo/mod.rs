//! Proximal policy optimization.
//!
//! [`train`] runs the standard loop: collect a rollout with the current
//! policy, compute GAE advantages, then take clipped-surrogate minibatch Adam
//! steps for several epochs. With `gradient_batch_override` set, every update
//! instead collects one fresh batch of that size and takes a single
//! full-batch step, and curves are best read against gradient steps.

mod adam;
mod checkpoint;
mod config;
mod eval;
mod gae;
mod loss;
mod normalize;
mod rollout;
mod trainer;

pub use adam::{adam_step, clip_grad_norm, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{Checkpoint, PolicySnapshot, TrainerRngState, CHECKPOINT_VERSION};
pub use config::PpoConfig;
pub use eval::{evaluate, random_policy_baseline, run_episode, EpisodeStats, EvalResult, EvalMode};
pub use gae::{compute_gae, normalize_advantages};
pub use loss::{
    ppo_loss, ppo_loss_grad, Batch, LossAccumulator, LossConfig, LossTerm, LossTerms, TermGradients,
};
pub use normalize::ObsNormalizer;
pub use rollout::{collect_rollout, PolicyContext, RolloutBuffer};
pub use trainer::{train, CurvePoint, TrainOutput, TrainSetup, Trainer};
