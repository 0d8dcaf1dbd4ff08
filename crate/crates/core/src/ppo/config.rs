use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PPO hyperparameters. Defaults follow the common Stable-Baselines3 values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub n_steps: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub clip_range: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    pub total_env_steps: u64,
    /// Large-batch mode: one fresh batch of this many transitions per
    /// gradient step, no epoch reuse.
    pub gradient_batch_override: Option<usize>,
    /// Number of evenly spaced checkpoints (the last one is the final state).
    pub checkpoint_count: usize,
    /// Deterministic evaluation episodes per evaluation point.
    pub eval_episodes: usize,
    /// Evaluate after every `eval_every` updates (and after the last one).
    pub eval_every: usize,
    pub normalize_observations: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            n_steps: 2048,
            minibatch_size: 64,
            epochs: 10,
            clip_range: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            vf_coef: 0.5,
            ent_coef: 0.0,
            learning_rate: 3e-4,
            max_grad_norm: 0.5,
            total_env_steps: 150_000,
            gradient_batch_override: None,
            checkpoint_count: 20,
            eval_episodes: 20,
            eval_every: 1,
            normalize_observations: false,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::config(m));
        if self.n_steps == 0 || self.minibatch_size == 0 || self.epochs == 0 {
            return fail("n_steps, minibatch_size and epochs must be positive");
        }
        if !self.n_steps.is_multiple_of(self.minibatch_size) {
            return fail("minibatch_size must divide n_steps");
        }
        if !(self.clip_range > 0.0 && self.clip_range < 1.0) {
            return fail("clip_range must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail("gamma must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return fail("gae_lambda must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0) || !(self.max_grad_norm > 0.0) {
            return fail("learning_rate and max_grad_norm must be positive");
        }
        if !(self.vf_coef >= 0.0) || !(self.ent_coef >= 0.0) {
            return fail("loss coefficients must be non-negative");
        }
        if self.gradient_batch_override == Some(0) {
            return fail("gradient_batch_override must be positive");
        }
        if self.checkpoint_count == 0 || self.eval_every == 0 {
            return fail("checkpoint_count and eval_every must be positive");
        }
        Ok(())
    }

    /// Transitions collected per update.
    pub fn rollout_len(&self) -> usize {
        self.gradient_batch_override.unwrap_or(self.n_steps)
    }

    /// Number of updates needed to reach `total_env_steps`.
    pub fn total_iterations(&self) -> u64 {
        self.total_env_steps.div_ceil(self.rollout_len() as u64)
    }

    /// Update indices (1-based) after which checkpoints are taken:
    /// `ceil(k·N / count)` for `k = 1..=count`, deduplicated.
    pub fn checkpoint_iterations(&self) -> alloc::vec::Vec<u64> {
        let n = self.total_iterations();
        let c = self.checkpoint_count as u64;
        let mut its: alloc::vec::Vec<u64> = (1..=c).map(|k| (k * n).div_ceil(c)).filter(|&i| i > 0).collect();
        its.dedup();
        its
    }
}
