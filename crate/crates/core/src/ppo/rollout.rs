//! On-policy experience collection.

use alloc::vec::Vec;

use crate::actuation::Actuator;
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::policy::{log_prob, sample_action, ActorCritic, FlatParams};
use crate::rng::Stream;

use super::{compute_gae, normalize_advantages, Batch, ObsNormalizer};

/// Network plus the (frozen) observation normalization used to act.
#[derive(Clone, Copy)]
pub struct PolicyContext<'a> {
    pub net: &'a ActorCritic,
    pub params: &'a FlatParams,
    pub normalizer: Option<&'a ObsNormalizer>,
}

impl PolicyContext<'_> {
    pub fn prepare(&self, raw: &[f64]) -> Vec<f64> {
        match self.normalizer {
            Some(n) => n.apply(raw),
            None => raw.to_vec(),
        }
    }

    /// Mean action (unclipped) and `log_std` for one raw observation.
    pub fn act_mean(&self, raw: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.net.forward_policy(self.params, &self.prepare(raw))
    }
}

/// One rollout. `observations` hold exactly what the networks saw.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutBuffer {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub raw_observations: Vec<f64>,
    pub observations: Vec<f64>,
    /// Unclipped policy samples (what `log_probs` refer to).
    pub actions: Vec<f64>,
    pub applied_torques: Vec<f64>,
    /// Environment rewards; at truncated episode ends this includes the
    /// `γ·V(s_T)` bootstrap.
    pub rewards: Vec<f64>,
    pub episode_ends: Vec<bool>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub last_value: f64,
    /// Normalized advantages.
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// Undiscounted returns of episodes completed during the rollout.
    pub finished_returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn batch(&self) -> Batch {
        Batch {
            obs_dim: self.obs_dim,
            act_dim: self.act_dim,
            observations: self.observations.clone(),
            actions: self.actions.clone(),
            old_log_probs: self.log_probs.clone(),
            advantages: self.advantages.clone(),
            returns: self.returns.clone(),
            old_values: self.values.clone(),
        }
    }
}

/// Collects `len` transitions continuing from the environment's current
/// state. Actions are drawn from `action_rng`; episode resets use `env_rng`.
/// `episode_return` carries the running return of the unfinished episode
/// across calls.
#[allow(clippy::too_many_arguments)]
pub fn collect_rollout(
    ctx: PolicyContext<'_>,
    env: &mut dyn Environment,
    actuator: &Actuator,
    len: usize,
    gamma: f64,
    lambda: f64,
    action_rng: &mut Stream,
    env_rng: &mut Stream,
    episode_return: &mut f64,
) -> Result<RolloutBuffer> {
    let obs_dim = ctx.net.obs_dim();
    let act_dim = ctx.net.act_dim();
    let dof = env.spec().dof;
    let mut buf = RolloutBuffer {
        obs_dim,
        act_dim,
        ..Default::default()
    };
    let mut raw = env.observation().values;
    for _ in 0..len {
        let obs = ctx.prepare(&raw);
        let (mean, log_std) = ctx.net.forward_policy(ctx.params, &obs)?;
        let value = ctx.net.forward_value(ctx.params, &obs)?;
        let action = sample_action(&mean, &log_std, action_rng);
        let lp = log_prob(&mean, &log_std, &action);
        if !lp.is_finite() || !value.is_finite() {
            return Err(Error::NumericDomain(alloc::format!(
                "non-finite policy output (log_prob {lp}, value {value})"
            )));
        }
        let clipped: Vec<f64> = action.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
        let cmd = actuator.command(&clipped, env.state());
        let tr = env.step(&cmd)?;
        *episode_return += tr.reward;

        let mut reward = tr.reward;
        if tr.done {
            let terminal = ctx.prepare(&tr.observation.values);
            reward += gamma * ctx.net.forward_value(ctx.params, &terminal)?;
            buf.finished_returns.push(*episode_return);
            *episode_return = 0.0;
        }

        buf.raw_observations.extend_from_slice(&raw);
        buf.observations.extend_from_slice(&obs);
        buf.actions.extend_from_slice(&action);
        if tr.applied_torque.is_empty() {
            buf.applied_torques.extend(core::iter::repeat_n(0.0, dof));
        } else {
            buf.applied_torques.extend_from_slice(&tr.applied_torque);
        }
        buf.rewards.push(reward);
        buf.episode_ends.push(tr.done);
        buf.log_probs.push(lp);
        buf.values.push(value);

        raw = if tr.done {
            env.reset(env_rng).values
        } else {
            tr.observation.values
        };
    }
    buf.last_value = ctx.net.forward_value(ctx.params, &ctx.prepare(&raw))?;
    let (mut adv, ret) = compute_gae(
        &buf.rewards,
        &buf.values,
        &buf.episode_ends,
        buf.last_value,
        gamma,
        lambda,
    );
    normalize_advantages(&mut adv);
    buf.advantages = adv;
    buf.returns = ret;
    Ok(buf)
}
