//! The PPO training loop.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::actuation::{ActuationConfig, Actuator};
use crate::envs::{EnvConfig, Environment};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::policy::{ActorCritic, FlatParams, NetSpec};
use crate::rng::{purpose, Stream};

use super::{
    adam_step, clip_grad_norm, collect_rollout, evaluate, ppo_loss, ppo_loss_grad, AdamState,
    Batch, Checkpoint, EvalMode, LossConfig, LossTerms, ObsNormalizer, PolicyContext, PpoConfig,
    TrainerRngState,
};

fn default_hidden() -> Vec<usize> {
    alloc::vec![64, 64]
}

/// What to train: environment, action representation, network, PPO settings
/// and seed. Stored verbatim in every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSetup {
    pub env: EnvConfig,
    pub actuation: ActuationConfig,
    #[serde(default = "default_hidden")]
    pub hidden_layers: Vec<usize>,
    #[serde(default)]
    pub ppo: PpoConfig,
    pub seed: u64,
}

impl TrainSetup {
    pub fn new(env: EnvConfig, actuation: ActuationConfig, ppo: PpoConfig, seed: u64) -> Self {
        Self {
            env,
            actuation,
            hidden_layers: default_hidden(),
            ppo,
            seed,
        }
    }

    pub fn net_spec(&self) -> NetSpec {
        NetSpec {
            obs_dim: self.env.obs_dim(),
            act_dim: self.env.spec().dof,
            hidden_layers: self.hidden_layers.clone(),
        }
    }

    pub fn network(&self) -> Result<ActorCritic> {
        ActorCritic::new(self.net_spec())
    }

    pub fn actuator(&self) -> Result<Actuator> {
        self.actuation.resolve(&self.env)
    }

    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        self.env.spec().validate()?;
        self.actuator()?;
        self.network()?;
        Ok(())
    }
}

/// One learning-curve sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub seed: u64,
    pub env_step: u64,
    pub gradient_step: u64,
    pub mean_return: f64,
    pub std_return: f64,
    pub discounted_return: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub final_checkpoint: Checkpoint,
    pub curve: Vec<CurvePoint>,
    /// Evenly spaced checkpoints in increasing env-step order; the last one
    /// is the final state.
    pub checkpoints: Vec<Checkpoint>,
}

pub struct Trainer {
    setup: TrainSetup,
    net: ActorCritic,
    actuator: Actuator,
    loss_cfg: LossConfig,
    env: Box<dyn Environment>,
    params: FlatParams,
    adam: AdamState,
    normalizer: Option<ObsNormalizer>,
    action_rng: Stream,
    shuffle_rng: Stream,
    env_rng: Stream,
    episode_return: f64,
    env_step: u64,
    gradient_step: u64,
    iteration: u64,
    frozen: Option<Batch>,
}

impl Trainer {
    pub fn new(setup: TrainSetup) -> Result<Self> {
        setup.validate()?;
        let net = setup.network()?;
        let actuator = setup.actuator()?;
        let seed = setup.seed;
        let params = net.init_params(&mut Stream::derived(seed, &[purpose::INIT]));
        let mut env_rng = Stream::derived(seed, &[purpose::ENV]);
        let mut env = setup.env.build()?;
        env.reset(&mut env_rng);
        let normalizer = setup
            .ppo
            .normalize_observations
            .then(|| ObsNormalizer::new(net.obs_dim()));
        Ok(Self {
            loss_cfg: LossConfig::from(&setup.ppo),
            adam: AdamState::new(params.len()),
            action_rng: Stream::derived(seed, &[purpose::ACTION]),
            shuffle_rng: Stream::derived(seed, &[purpose::SHUFFLE]),
            env_rng,
            env,
            params,
            normalizer,
            net,
            actuator,
            setup,
            episode_return: 0.0,
            env_step: 0,
            gradient_step: 0,
            iteration: 0,
            frozen: None,
        })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let setup = ckpt.setup.clone();
        setup.validate()?;
        let net = setup.network()?;
        let params = FlatParams::from_data(ckpt.params.clone(), net.layout().clone())?;
        if ckpt.adam.m.len() != params.len() || ckpt.adam.v.len() != params.len() {
            return Err(Error::Layout(format!(
                "optimizer state has {} entries, network has {}",
                ckpt.adam.m.len(),
                params.len()
            )));
        }
        let mut env = setup.env.build()?;
        env.restore(&ckpt.env)?;
        Ok(Self {
            loss_cfg: LossConfig::from(&setup.ppo),
            actuator: setup.actuator()?,
            adam: ckpt.adam.clone(),
            normalizer: ckpt.normalizer.clone(),
            action_rng: Stream::from_state(&ckpt.rng.action),
            shuffle_rng: Stream::from_state(&ckpt.rng.shuffle),
            env_rng: Stream::from_state(&ckpt.rng.env),
            env,
            params,
            net,
            setup,
            episode_return: ckpt.episode_return,
            env_step: ckpt.env_step,
            gradient_step: ckpt.gradient_step,
            iteration: ckpt.iteration,
            frozen: ckpt.frozen.clone(),
        })
    }

    pub fn setup(&self) -> &TrainSetup {
        &self.setup
    }

    pub fn net(&self) -> &ActorCritic {
        &self.net
    }

    pub fn params(&self) -> &FlatParams {
        &self.params
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn env_step(&self) -> u64 {
        self.env_step
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.setup.ppo.total_iterations()
    }

    pub fn context(&self) -> PolicyContext<'_> {
        PolicyContext {
            net: &self.net,
            params: &self.params,
            normalizer: self.normalizer.as_ref(),
        }
    }

    /// Loss terms of the current parameters on the last collected rollout.
    pub fn frozen_loss(&self) -> Option<LossTerms> {
        self.frozen
            .as_ref()
            .map(|b| ppo_loss(&self.net, &self.params, b, &self.loss_cfg))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            setup: self.setup.clone(),
            params: self.params.data.clone(),
            adam: self.adam.clone(),
            normalizer: self.normalizer.clone(),
            rng: TrainerRngState {
                action: self.action_rng.state(),
                shuffle: self.shuffle_rng.state(),
                env: self.env_rng.state(),
            },
            env: self.env.snapshot(),
            episode_return: self.episode_return,
            env_step: self.env_step,
            gradient_step: self.gradient_step,
            iteration: self.iteration,
            frozen: self.frozen.clone(),
            stored_loss: self.frozen_loss(),
        }
    }

    /// One update: collect a rollout, then optimize on it.
    pub fn iterate(&mut self) -> Result<()> {
        let cfg = self.setup.ppo.clone();
        let len = cfg.rollout_len();
        let buf = {
            let ctx = PolicyContext {
                net: &self.net,
                params: &self.params,
                normalizer: self.normalizer.as_ref(),
            };
            collect_rollout(
                ctx,
                self.env.as_mut(),
                &self.actuator,
                len,
                cfg.gamma,
                cfg.gae_lambda,
                &mut self.action_rng,
                &mut self.env_rng,
                &mut self.episode_return,
            )?
        };
        if let Some(n) = self.normalizer.as_mut() {
            n.update(&buf.raw_observations);
        }
        let batch = buf.batch();
        if cfg.gradient_batch_override.is_some() {
            self.gradient_update(&batch)?;
        } else {
            let mut order: Vec<usize> = (0..len).collect();
            for _ in 0..cfg.epochs {
                self.shuffle_rng.shuffle(&mut order);
                for idx in order.chunks(cfg.minibatch_size) {
                    self.gradient_update(&batch.gather(idx))?;
                }
            }
        }
        self.env_step += len as u64;
        self.iteration += 1;
        self.frozen = Some(batch);
        Ok(())
    }

    fn gradient_update(&mut self, batch: &Batch) -> Result<()> {
        let (terms, grads) = ppo_loss_grad(&self.net, &self.params, batch, &self.loss_cfg);
        let mut g = grads.total(&self.loss_cfg);
        if !terms.is_finite() || !g.is_finite() {
            return Err(self.abort("non-finite loss or gradient", terms, batch));
        }
        clip_grad_norm(&mut g.data, self.setup.ppo.max_grad_norm);
        adam_step(&mut self.params.data, &g.data, &mut self.adam, self.setup.ppo.learning_rate);
        if !self.params.is_finite() {
            return Err(self.abort("non-finite parameters after update", terms, batch));
        }
        self.gradient_step += 1;
        Ok(())
    }

    fn abort(&self, what: &str, terms: LossTerms, batch: &Batch) -> Error {
        Error::NumericAbort {
            message: format!(
                "{what} at iteration {} gradient step {} (loss {:?})",
                self.iteration, self.gradient_step, terms
            ),
            dump: batch.dump(),
        }
    }

    /// Deterministic evaluation of the current policy. The episode set is
    /// the same at every evaluation point of a run.
    pub fn evaluate<E: Executor + ?Sized>(&self, exec: &E) -> Result<CurvePoint> {
        let cfg = &self.setup.ppo;
        let r = evaluate(
            exec,
            self.context(),
            &self.setup.env,
            &self.actuator,
            EvalMode::Deterministic,
            cfg.eval_episodes,
            self.setup.seed,
            cfg.gamma,
        )?;
        Ok(CurvePoint {
            seed: self.setup.seed,
            env_step: self.env_step,
            gradient_step: self.gradient_step,
            mean_return: r.mean_return,
            std_return: r.std_return,
            discounted_return: r.mean_discounted_return,
        })
    }

    /// Runs updates until `until_iteration` (or the end of training),
    /// calling `on_checkpoint` at every scheduled checkpoint.
    pub fn run_until<E, F>(&mut self, exec: &E, until_iteration: u64, mut on_checkpoint: F) -> Result<Vec<CurvePoint>>
    where
        E: Executor + ?Sized,
        F: FnMut(Checkpoint) -> Result<()>,
    {
        let total = self.setup.ppo.total_iterations();
        let schedule = self.setup.ppo.checkpoint_iterations();
        let eval_every = self.setup.ppo.eval_every as u64;
        let mut curve = Vec::new();
        while self.iteration < total.min(until_iteration) {
            self.iterate()?;
            if self.iteration.is_multiple_of(eval_every) || self.iteration == total {
                curve.push(self.evaluate(exec)?);
            }
            if schedule.binary_search(&self.iteration).is_ok() {
                on_checkpoint(self.checkpoint())?;
            }
        }
        Ok(curve)
    }

    pub fn run<E: Executor + ?Sized>(mut self, exec: &E) -> Result<TrainOutput> {
        let mut checkpoints = Vec::new();
        let curve = self.run_until(exec, u64::MAX, |c| {
            checkpoints.push(c);
            Ok(())
        })?;
        Ok(TrainOutput {
            final_checkpoint: self.checkpoint(),
            curve,
            checkpoints,
        })
    }
}

/// Trains from scratch; see [`Trainer`].
pub fn train<E: Executor + ?Sized>(setup: TrainSetup, exec: &E) -> Result<TrainOutput> {
    Trainer::new(setup)?.run(exec)
}
