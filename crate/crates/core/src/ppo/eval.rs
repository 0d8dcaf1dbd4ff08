//! Policy evaluation episodes.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::actuation::Actuator;
use crate::envs::{EnvConfig, JointState};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::policy::sample_action;
use crate::rng::{purpose, Stream};
use crate::stats;

use super::PolicyContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Act with the policy mean.
    Deterministic,
    /// Sample from the policy.
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub total_return: f64,
    pub discounted_return: f64,
    pub length: usize,
    /// Sum of rewards after the first step.
    pub return_after_first: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalResult {
    pub episodes: Vec<EpisodeStats>,
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_discounted_return: f64,
}

impl EvalResult {
    pub fn from_episodes(episodes: Vec<EpisodeStats>) -> Self {
        let r: Vec<f64> = episodes.iter().map(|e| e.total_return).collect();
        let d: Vec<f64> = episodes.iter().map(|e| e.discounted_return).collect();
        Self {
            mean_return: stats::mean(&r),
            std_return: stats::std_pop(&r),
            mean_discounted_return: stats::mean(&d),
            episodes,
        }
    }

    pub fn returns(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.total_return).collect()
    }
}

/// Runs one full episode. `policy` maps the raw observation and joint state
/// to a normalized action; it is clipped to `[-1, 1]` before actuation.
pub fn run_episode<P>(
    env: &EnvConfig,
    actuator: &Actuator,
    reset_seed: u64,
    gamma: f64,
    mut policy: P,
) -> Result<EpisodeStats>
where
    P: FnMut(&[f64], &JointState) -> Result<Vec<f64>>,
{
    let mut instance = env.build()?;
    let mut obs = instance.reset_seeded(reset_seed).values;
    let mut stats = EpisodeStats::default();
    let mut discount = 1.0;
    loop {
        let action = policy(&obs, instance.state())?;
        let clipped: Vec<f64> = action.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
        let cmd = actuator.command(&clipped, instance.state());
        let tr = instance.step(&cmd)?;
        if !tr.reward.is_finite() {
            return Err(Error::NumericDomain(alloc::format!("non-finite reward {}", tr.reward)));
        }
        stats.total_return += tr.reward;
        stats.discounted_return += discount * tr.reward;
        if stats.length > 0 {
            stats.return_after_first += tr.reward;
        }
        discount *= gamma;
        stats.length += 1;
        obs = tr.observation.values;
        if tr.done {
            return Ok(stats);
        }
    }
}

/// Evaluates a network policy over `episodes` episodes. Episode `i` resets
/// from `derive(seed, EVAL, i)`; stochastic actions use a sibling stream.
#[allow(clippy::too_many_arguments)]
pub fn evaluate<E: Executor + ?Sized>(
    exec: &E,
    ctx: PolicyContext<'_>,
    env: &EnvConfig,
    actuator: &Actuator,
    mode: EvalMode,
    episodes: usize,
    seed: u64,
    gamma: f64,
) -> Result<EvalResult> {
    let results = exec.map(episodes, |i| {
        let reset = crate::rng::derive_seed(seed, &[purpose::EVAL, i as u64, 0]);
        let mut rng = Stream::derived(seed, &[purpose::EVAL, i as u64, 1]);
        run_episode(env, actuator, reset, gamma, |obs, _| {
            let (mean, log_std) = ctx.act_mean(obs)?;
            Ok(match mode {
                EvalMode::Deterministic => mean,
                EvalMode::Stochastic => sample_action(&mean, &log_std, &mut rng),
            })
        })
    });
    Ok(EvalResult::from_episodes(results.into_iter().collect::<Result<Vec<_>>>()?))
}

/// Returns of a policy drawing actions uniformly from `[-1, 1]`.
pub fn random_policy_baseline<E: Executor + ?Sized>(
    exec: &E,
    env: &EnvConfig,
    actuator: &Actuator,
    episodes: usize,
    seed: u64,
    gamma: f64,
) -> Result<EvalResult> {
    let dof = env.spec().dof;
    let results = exec.map(episodes, |i| {
        let reset = crate::rng::derive_seed(seed, &[purpose::BASELINE, i as u64, 0]);
        let mut rng = Stream::derived(seed, &[purpose::BASELINE, i as u64, 1]);
        run_episode(env, actuator, reset, gamma, |_, _| {
            Ok((0..dof).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
        })
    });
    Ok(EvalResult::from_episodes(results.into_iter().collect::<Result<Vec<_>>>()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuation::{ActuationConfig, ActuationKind, ControllerGains};
    use crate::envs::ReacherParams;
    use crate::exec::Sequential;
    use crate::policy::{ActorCritic, NetSpec};
    use alloc::vec;

    #[test]
    fn deterministic_eval_is_reproducible() {
        let env = EnvConfig::default();
        let net = ActorCritic::new(NetSpec::new(3, 1)).unwrap();
        let p = net.init_params(&mut Stream::new(2));
        let act = ActuationConfig::torque().resolve(&env).unwrap();
        let ctx = PolicyContext {
            net: &net,
            params: &p,
            normalizer: None,
        };
        let a = evaluate(&Sequential, ctx, &env, &act, EvalMode::Deterministic, 4, 9, 0.99).unwrap();
        let b = evaluate(&Sequential, ctx, &env, &act, EvalMode::Deterministic, 4, 9, 0.99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.episodes.len(), 4);
        assert!(a.episodes.iter().all(|e| e.length == 200));
        let (lo, _) = env.build().unwrap().reward_bounds();
        assert!(a.mean_return <= 0.0 && a.mean_return >= 200.0 * lo);
    }

    #[test]
    fn discounted_return_of_constant_reward() {
        // zero torque at the upright rest state would give zero reward; use
        // the random baseline instead and check the geometric weighting
        let env = EnvConfig::default();
        let act = ActuationConfig::torque().resolve(&env).unwrap();
        let r = random_policy_baseline(&Sequential, &env, &act, 1, 3, 1.0).unwrap();
        let e = r.episodes[0];
        assert!((e.total_return - e.discounted_return).abs() < 1e-9);
    }

    #[test]
    fn scripted_ideal_position_policy_earns_zero_after_first_step() {
        let env = EnvConfig::JointSpaceReacher(ReacherParams::default());
        let act = ActuationConfig::new(ActuationKind::IdealPosition, ControllerGains::default())
            .resolve(&env)
            .unwrap();
        let hi = act.bounds.high.clone();
        let ep = run_episode(&env, &act, 11, 0.99, |obs, _| {
            // obs = (q, target, q̇, Δq); command the target angles
            Ok(vec![obs[2] / hi[0], obs[3] / hi[1]])
        })
        .unwrap();
        assert!(ep.return_after_first.abs() < 1e-10);
        assert!(ep.total_return < 0.0);
    }
}
